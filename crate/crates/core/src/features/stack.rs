use serde::{Deserialize, Serialize};

use crate::autograd::Tensor;

use super::FeatureError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Object,
    Patch,
    Global,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFeature {
    pub level: Level,
    pub vector: Vec<f64>,
}

/// The attention slots of one image: `n` objects, `n` patches, then the
/// global feature, all of dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    rows: Vec<InstanceFeature>,
    n: usize,
}

/// Orders the three levels as `[objects.., patches.., global]`.
pub fn stack_features(
    objects: Vec<InstanceFeature>,
    patches: Vec<InstanceFeature>,
    global: InstanceFeature,
) -> Result<FeatureStack, FeatureError> {
    if objects.len() != patches.len() {
        return Err(FeatureError::Shape {
            what: "patch count".into(),
            expected: objects.len(),
            found: patches.len(),
        });
    }
    let d = global.vector.len();
    if d == 0 {
        return Err(FeatureError::Shape {
            what: "global feature".into(),
            expected: 1,
            found: 0,
        });
    }
    let n = objects.len();
    let mut rows = Vec::with_capacity(2 * n + 1);
    for (f, level) in objects
        .into_iter()
        .map(|f| (f, Level::Object))
        .chain(patches.into_iter().map(|f| (f, Level::Patch)))
        .chain(std::iter::once((global, Level::Global)))
    {
        if f.vector.len() != d {
            return Err(FeatureError::Shape {
                what: format!("{level:?} feature"),
                expected: d,
                found: f.vector.len(),
            });
        }
        rows.push(InstanceFeature { level, ..f });
    }
    Ok(FeatureStack { rows, n })
}

impl FeatureStack {
    /// Builds a stack from a `(2n+1) × d` matrix in slot order.
    pub fn from_tensor(t: &Tensor) -> Result<Self, FeatureError> {
        let slots = t.rows();
        if slots.is_multiple_of(2) {
            return Err(FeatureError::Shape {
                what: "slot count (must be 2n+1)".into(),
                expected: slots + 1,
                found: slots,
            });
        }
        let n = (slots - 1) / 2;
        let row = |i: usize, level| InstanceFeature {
            level,
            vector: t.row_slice(i).to_vec(),
        };
        let objects = (0..n).map(|i| row(i, Level::Object)).collect();
        let patches = (n..2 * n).map(|i| row(i, Level::Patch)).collect();
        stack_features(objects, patches, row(2 * n, Level::Global))
    }

    pub fn rows(&self) -> &[InstanceFeature] {
        &self.rows
    }

    /// Object count `n`; the stack has `2n+1` rows.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn slots(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.rows[0].vector.len()
    }

    pub fn to_tensor(&self) -> Tensor {
        let data = self.rows.iter().flat_map(|r| r.vector.iter().copied()).collect();
        Tensor::matrix(self.slots(), self.dim(), data).expect("rows share dimension d")
    }

    /// `obj1..objn, patch1..patchn, global`.
    pub fn slot_labels(&self) -> Vec<String> {
        slot_labels(self.n)
    }
}

pub fn slot_labels(n: usize) -> Vec<String> {
    (1..=n)
        .map(|i| format!("obj{i}"))
        .chain((1..=n).map(|i| format!("patch{i}")))
        .chain(std::iter::once("global".to_string()))
        .collect()
}
