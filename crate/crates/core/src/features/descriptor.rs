use crate::autograd::Tensor;

use super::{expand_patch, top_n_boxes, BoundingBox, FeatureError, InstanceFeature, Level, Raster};

/// Length of the hand-crafted region descriptor.
pub const RAW_DIM: usize = 9;

/// Region statistics standing in for pooled CNN activations:
/// `[mean R, mean G, mean B, grayscale std, w/W, h/H, cx/W, cy/H, area/image area]`.
///
/// A pixel belongs to the region when its center lies inside the box. When
/// no pixel qualifies (a zero-area clipped box) the pixel nearest the box
/// center is used, so the result is always finite.
pub fn raw_descriptor(image: &Raster, bbox: &BoundingBox) -> [f64; RAW_DIM] {
    let (iw, ih) = (image.width(), image.height());
    let (wf, hf) = (iw as f64, ih as f64);
    let cols = pixel_span(bbox.x0(), bbox.x1(), iw);
    let rows = pixel_span(bbox.y0(), bbox.y1(), ih);

    let mut pixels = Vec::new();
    match (cols, rows) {
        (Some((x0, x1)), Some((y0, y1))) => {
            for y in y0..y1 {
                for x in x0..x1 {
                    pixels.push(image.pixel(x, y));
                }
            }
        }
        _ => {
            let x = (bbox.cx.floor().max(0.0) as u32).min(iw - 1);
            let y = (bbox.cy.floor().max(0.0) as u32).min(ih - 1);
            pixels.push(image.pixel(x, y));
        }
    }

    let count = pixels.len() as f64;
    let mut mean = [0.0; 3];
    for p in &pixels {
        for c in 0..3 {
            mean[c] += p[c];
        }
    }
    mean.iter_mut().for_each(|m| *m /= count);
    let gray: Vec<f64> = pixels.iter().map(|p| luma(*p)).collect();
    let gray_mean = gray.iter().sum::<f64>() / count;
    let var = gray.iter().map(|g| (g - gray_mean).powi(2)).sum::<f64>() / count;

    [
        mean[0],
        mean[1],
        mean[2],
        var.sqrt(),
        bbox.w / wf,
        bbox.h / hf,
        bbox.cx / wf,
        bbox.cy / hf,
        bbox.area() / (wf * hf),
    ]
}

/// Half-open pixel index range whose centers fall in `[lo, hi)`.
fn pixel_span(lo: f64, hi: f64, extent: u32) -> Option<(u32, u32)> {
    let start = (lo - 0.5).ceil().max(0.0);
    let end = (hi - 0.5).ceil().min(extent as f64);
    (end > start).then_some((start as u32, end as u32))
}

fn luma(p: [f64; 3]) -> f64 {
    0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]
}

/// Raw descriptor projected to `d` dimensions through a `RAW_DIM × d` map.
pub fn extract_descriptor(
    image: &Raster,
    bbox: &BoundingBox,
    projection: &Tensor,
    level: Level,
) -> Result<InstanceFeature, FeatureError> {
    let raw = Tensor::row(&raw_descriptor(image, bbox));
    let projected = raw.matmul(projection).map_err(|_| FeatureError::Shape {
        what: "projection rows".into(),
        expected: RAW_DIM,
        found: projection.rows(),
    })?;
    Ok(InstanceFeature {
        level,
        vector: projected.into_data(),
    })
}

/// Unprojected descriptors for every slot of one image. Projection happens
/// inside the decoder so the three maps can be trained.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFeatures {
    pub objects: Vec<[f64; RAW_DIM]>,
    pub patches: Vec<[f64; RAW_DIM]>,
    pub global: [f64; RAW_DIM],
}

impl RawFeatures {
    /// Top-`n` object boxes, their `k`-scaled patches, and the whole image.
    pub fn extract(
        image: &Raster,
        boxes: &[BoundingBox],
        n: usize,
        k: f64,
    ) -> Result<Self, FeatureError> {
        let (w, h) = (image.width(), image.height());
        let objects = top_n_boxes(boxes, n, w, h);
        let mut obj = Vec::with_capacity(n);
        let mut patch = Vec::with_capacity(n);
        for b in &objects {
            obj.push(raw_descriptor(image, &b.clip(w, h)));
            patch.push(raw_descriptor(image, &expand_patch(b, k, w, h)?));
        }
        Ok(Self {
            objects: obj,
            patches: patch,
            global: raw_descriptor(image, &BoundingBox::full_image(w, h)),
        })
    }

    pub fn n(&self) -> usize {
        self.objects.len()
    }
}
