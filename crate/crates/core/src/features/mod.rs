//! Multi-level instance features: object boxes, their `k`-scaled patches and
//! one whole-image descriptor, stacked into a `(2n+1) × d` matrix.

mod descriptor;
mod precomputed;
mod raster;
mod stack;

pub use descriptor::{extract_descriptor, raw_descriptor, RawFeatures, RAW_DIM};
pub use precomputed::{read_precomputed, write_precomputed, PrecomputedRecord};
pub use raster::Raster;
pub use stack::{slot_labels, stack_features, FeatureStack, InstanceFeature, Level};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("scale factor must be positive and finite, got {0}")]
    Scale(f64),
    #[error("box extents must be positive, got w={w} h={h}")]
    Extent { w: f64, h: f64 },
    #[error("box {0:?} does not intersect the {1}x{2} image")]
    OutsideImage(BoundingBox, u32, u32),
    #[error("{what}: expected length {expected}, found {found}")]
    Shape {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("raster buffer holds {found} values, expected {expected}")]
    Raster { expected: usize, found: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
}

/// Axis-aligned box in pixel coordinates, stored as center and extents.
///
/// Boxes built with [`BoundingBox::new`] have positive extents. Clipping to
/// an image can yield zero extents when the box only touches the border.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self, FeatureError> {
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            return Err(FeatureError::Extent { w, h });
        }
        Ok(Self { cx, cy, w, h })
    }

    pub fn from_edges(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self {
            cx: (x0 + x1) / 2.0,
            cy: (y0 + y1) / 2.0,
            w: x1 - x0,
            h: y1 - y0,
        }
    }

    pub fn full_image(width: u32, height: u32) -> Self {
        Self::from_edges(0.0, 0.0, width as f64, height as f64)
    }

    pub fn x0(&self) -> f64 {
        self.cx - self.w / 2.0
    }

    pub fn x1(&self) -> f64 {
        self.cx + self.w / 2.0
    }

    pub fn y0(&self) -> f64 {
        self.cy - self.h / 2.0
    }

    pub fn y1(&self) -> f64 {
        self.cy + self.h / 2.0
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Each edge clamped independently to `[0, width] × [0, height]`.
    /// A box already inside the image is returned unchanged.
    pub fn clip(&self, width: u32, height: u32) -> Self {
        if self.contained_in(width, height) {
            return *self;
        }
        let (w, h) = (width as f64, height as f64);
        let x0 = self.x0().clamp(0.0, w);
        let x1 = self.x1().clamp(0.0, w);
        let y0 = self.y0().clamp(0.0, h);
        let y1 = self.y1().clamp(0.0, h);
        Self::from_edges(x0, y0, x1, y1)
    }

    pub fn intersects_image(&self, width: u32, height: u32) -> bool {
        self.x1() > 0.0 && self.y1() > 0.0 && self.x0() < width as f64 && self.y0() < height as f64
    }

    pub fn contained_in(&self, width: u32, height: u32) -> bool {
        self.x0() >= 0.0 && self.y0() >= 0.0 && self.x1() <= width as f64 && self.y1() <= height as f64
    }

    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let iw = (self.x1().min(other.x1()) - self.x0().max(other.x0())).max(0.0);
        let ih = (self.y1().min(other.y1()) - self.y0().max(other.y0())).max(0.0);
        iw * ih
    }

    pub fn iou(&self, other: &BoundingBox) -> f64 {
        let inter = self.intersection_area(other);
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

/// The surrounding patch of an object: same center and aspect ratio with
/// extents scaled by `k`, then clipped edge by edge to the image. Clipping
/// at a border moves the effective center and changes the ratio.
pub fn expand_patch(
    bbox: &BoundingBox,
    k: f64,
    image_w: u32,
    image_h: u32,
) -> Result<BoundingBox, FeatureError> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(FeatureError::Scale(k));
    }
    if !bbox.intersects_image(image_w, image_h) {
        return Err(FeatureError::OutsideImage(*bbox, image_w, image_h));
    }
    let scaled = BoundingBox {
        cx: bbox.cx,
        cy: bbox.cy,
        w: bbox.w * k,
        h: bbox.h * k,
    };
    Ok(scaled.clip(image_w, image_h))
}

/// Stand-in for detector proposals: the `n` largest boxes by area.
///
/// Ties in area go to the box whose center is further left, then higher up.
/// Short lists are padded by repeating the last box; an empty list becomes
/// `n` copies of the full-image box.
pub fn top_n_boxes(boxes: &[BoundingBox], n: usize, image_w: u32, image_h: u32) -> Vec<BoundingBox> {
    if n == 0 {
        return Vec::new();
    }
    let mut sorted = boxes.to_vec();
    sorted.sort_by(|a, b| {
        b.area()
            .total_cmp(&a.area())
            .then(a.cx.total_cmp(&b.cx))
            .then(a.cy.total_cmp(&b.cy))
            .then(a.w.total_cmp(&b.w))
    });
    sorted.truncate(n);
    let pad = sorted
        .last()
        .copied()
        .unwrap_or_else(|| BoundingBox::full_image(image_w, image_h));
    sorted.resize(n, pad);
    sorted
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bx(cx: f64, cy: f64, w: f64, h: f64) -> BoundingBox {
        BoundingBox::new(cx, cy, w, h).unwrap()
    }

    #[test]
    fn expand_patch_examples() {
        let b = bx(100.0, 60.0, 30.0, 10.0);
        assert_eq!(expand_patch(&b, 1.0, 256, 256).unwrap(), b);

        let interior = bx(128.0, 128.0, 40.0, 20.0);
        assert_eq!(
            expand_patch(&interior, 2.0, 256, 256).unwrap(),
            bx(128.0, 128.0, 80.0, 40.0)
        );

        // Edges [-30, 50] clip to [0, 50] on both axes.
        let corner = bx(10.0, 10.0, 40.0, 40.0);
        assert_eq!(
            expand_patch(&corner, 2.0, 256, 256).unwrap(),
            bx(25.0, 25.0, 50.0, 50.0)
        );
    }

    #[test]
    fn expand_patch_rejects_bad_scale_and_outside_box() {
        let b = bx(10.0, 10.0, 4.0, 4.0);
        assert!(matches!(expand_patch(&b, 0.0, 64, 64), Err(FeatureError::Scale(_))));
        assert!(matches!(expand_patch(&b, -2.0, 64, 64), Err(FeatureError::Scale(_))));
        let outside = bx(100.0, 100.0, 4.0, 4.0);
        assert!(matches!(
            expand_patch(&outside, 2.0, 64, 64),
            Err(FeatureError::OutsideImage(..))
        ));
    }

    #[test]
    fn box_constructor_rejects_degenerate_extents() {
        assert!(BoundingBox::new(1.0, 1.0, 0.0, 1.0).is_err());
        assert!(BoundingBox::new(1.0, 1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn top_n_examples() {
        let boxes = vec![
            bx(10.0, 10.0, 4.0, 4.0),
            bx(30.0, 30.0, 10.0, 10.0),
            bx(50.0, 10.0, 6.0, 6.0),
            bx(20.0, 50.0, 8.0, 8.0),
            bx(40.0, 40.0, 2.0, 2.0),
        ];
        let top = top_n_boxes(&boxes, 5, 64, 64);
        let areas: Vec<f64> = top.iter().map(BoundingBox::area).collect();
        assert_eq!(areas, vec![100.0, 64.0, 36.0, 16.0, 4.0]);

        let two = top_n_boxes(&boxes[..2], 5, 64, 64);
        assert_eq!(two, vec![boxes[1], boxes[0], boxes[0], boxes[0], boxes[0]]);

        let empty = top_n_boxes(&[], 3, 64, 48);
        assert_eq!(empty, vec![BoundingBox::full_image(64, 48); 3]);
    }

    #[test]
    fn top_n_ties_break_left_then_top() {
        let a = bx(30.0, 5.0, 4.0, 4.0);
        let b = bx(10.0, 20.0, 4.0, 4.0);
        let c = bx(10.0, 8.0, 4.0, 4.0);
        assert_eq!(top_n_boxes(&[a, b, c], 3, 64, 64), vec![c, b, a]);
    }

    fn interior_box() -> impl Strategy<Value = BoundingBox> {
        (1.0f64..100.0, 1.0f64..100.0, 0.0f64..1.0, 0.0f64..1.0).prop_map(|(w, h, fx, fy)| {
            let cx = w / 2.0 + fx * (256.0 - w);
            let cy = h / 2.0 + fy * (256.0 - h);
            BoundingBox { cx, cy, w, h }
        })
    }

    proptest! {
        #[test]
        fn unit_scale_is_identity_on_interior_boxes(b in interior_box()) {
            prop_assert_eq!(expand_patch(&b, 1.0, 256, 256).unwrap(), b);
        }

        #[test]
        fn expanded_patch_stays_inside_image(b in interior_box(), k in 0.1f64..6.0) {
            let p = expand_patch(&b, k, 256, 256).unwrap();
            prop_assert!(p.contained_in(256, 256));
        }

        #[test]
        fn unclipped_expansion_keeps_center_and_ratio(b in interior_box(), k in 0.1f64..1.0) {
            // Shrinking an interior box never reaches the border.
            let p = expand_patch(&b, k, 256, 256).unwrap();
            prop_assert!((p.cx - b.cx).abs() < 1e-9 && (p.cy - b.cy).abs() < 1e-9);
            prop_assert!((p.w / p.h - b.w / b.h).abs() < 1e-9 * (b.w / b.h).max(1.0));
        }

        #[test]
        fn top_n_ignores_input_order(
            boxes in proptest::collection::vec(interior_box(), 0..8),
            n in 1usize..7,
            rot in 0usize..8,
        ) {
            let mut shuffled = boxes.clone();
            if !shuffled.is_empty() {
                let r = rot % shuffled.len();
                shuffled.rotate_left(r);
                shuffled.reverse();
            }
            prop_assert_eq!(top_n_boxes(&boxes, n, 256, 256), top_n_boxes(&shuffled, n, 256, 256));
        }
    }
}
