use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::{BoundingBox, Raster};

use super::captions::caption_templates;
use super::{Background, ObjectClass, MAX_IOU};

/// Default raster side length in pixels.
pub const IMAGE_SIZE: u32 = 64;
/// Upper bound on objects per scene.
pub const MAX_OBJECTS: usize = 6;
const MAX_REJECTIONS: usize = 1000;
const COLOR_JITTER: f64 = 0.04;

/// Snaps a color to the 8-bit grid so rasters survive PNG storage exactly.
fn quantize(c: [f64; 3]) -> [f64; 3] {
    c.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() / 255.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedObject {
    pub class: ObjectClass,
    pub bbox: BoundingBox,
    pub color: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: u32,
    pub height: u32,
    pub background: Background,
    pub objects: Vec<PlacedObject>,
}

impl SceneSpec {
    pub fn boxes(&self) -> Vec<BoundingBox> {
        self.objects.iter().map(|o| o.bbox).collect()
    }

    /// Flat background with every object painted in placement order.
    /// Ponds, tanks and trees are ellipses; everything else is a rectangle.
    /// Colors are snapped to 8-bit levels.
    pub fn render(&self) -> Raster {
        let mut img = Raster::filled(self.width, self.height, quantize(self.background.color()));
        for o in &self.objects {
            let b = o.bbox;
            let round = o.class.is_round();
            for y in 0..self.height {
                for x in 0..self.width {
                    let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                    let inside = if round {
                        let dx = (px - b.cx) / (b.w / 2.0);
                        let dy = (py - b.cy) / (b.h / 2.0);
                        dx * dx + dy * dy <= 1.0
                    } else {
                        px >= b.x0() && px < b.x1() && py >= b.y0() && py < b.y1()
                    };
                    if inside {
                        img.set_pixel(x, y, quantize(o.color));
                    }
                }
            }
        }
        img
    }
}

/// One generated image with its scene description and five captions.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptionSample {
    pub image_id: String,
    pub raster: Raster,
    pub scene: SceneSpec,
    pub captions: [String; 5],
}

pub fn image_id(index: usize) -> String {
    format!("img{index:05}")
}

fn random_box(class: ObjectClass, rng: &mut ChaCha8Rng, width: u32, height: u32) -> BoundingBox {
    let ((l0, l1), (s0, s1)) = class.size_range();
    let long = rng.gen_range(l0..=l1).min(width as i64);
    let short = rng.gen_range(s0..=s1).min(height as i64);
    let (w, h) = if class.is_elongated() && rng.gen_bool(0.5) {
        (short.min(width as i64), long.min(height as i64))
    } else {
        (long, short)
    };
    let x0 = rng.gen_range(0..=width as i64 - w);
    let y0 = rng.gen_range(0..=height as i64 - h);
    BoundingBox::from_edges(x0 as f64, y0 as f64, (x0 + w) as f64, (y0 + h) as f64)
}

/// A scene fully determined by `(seed, index)`.
///
/// Draws 0–6 objects with random classes; each is placed by rejection
/// sampling until its IoU with every earlier box is at most 0.3. An object
/// that cannot be placed after 1000 attempts is dropped, so generation never
/// fails.
pub fn generate_scene(seed: u64, index: usize) -> CaptionSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let (width, height) = (IMAGE_SIZE, IMAGE_SIZE);
    let background = Background::ALL[rng.gen_range(0..Background::ALL.len())];
    let count = rng.gen_range(0..=MAX_OBJECTS);
    let mut objects: Vec<PlacedObject> = Vec::with_capacity(count);
    for _ in 0..count {
        let class = ObjectClass::ALL[rng.gen_range(0..ObjectClass::ALL.len())];
        let base = class.color();
        let mut color = [0.0; 3];
        for (c, b) in color.iter_mut().zip(base) {
            *c = b + rng.gen_range(-COLOR_JITTER..=COLOR_JITTER);
        }
        let color = quantize(color);
        for _ in 0..MAX_REJECTIONS {
            let bbox = random_box(class, &mut rng, width, height);
            if objects.iter().all(|o| o.bbox.iou(&bbox) <= MAX_IOU) {
                objects.push(PlacedObject { class, bbox, color });
                break;
            }
        }
    }
    let scene = SceneSpec {
        width,
        height,
        background,
        objects,
    };
    let raster = scene.render();
    let captions = caption_templates(&scene);
    CaptionSample {
        image_id: image_id(index),
        raster,
        scene,
        captions,
    }
}
