//! Deterministic synthetic scenes standing in for remote-sensing caption
//! corpora: flat backgrounds with solid shapes, ground-truth boxes, and five
//! templated captions per image.

mod captions;
mod io;
mod scene;

pub use captions::{caption_templates, position_phrase};
pub use io::{load_dataset, load_split, write_dataset, DatasetManifest, SplitEntry, TEMPLATE_VERSION};
pub use scene::{generate_scene, image_id, CaptionSample, PlacedObject, SceneSpec, IMAGE_SIZE, MAX_OBJECTS};

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decoder::Vocabulary;

/// Largest IoU allowed between two objects of one scene.
pub const MAX_IOU: f64 = 0.3;
/// Smallest corpus that can be split 80/10/10 with non-empty parts.
pub const MIN_SPLIT_SIZE: usize = 10;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("need at least {MIN_SPLIT_SIZE} samples to split, got {0}")]
    TooFew(usize),
    #[error("output directory {0} is not empty (use --force to overwrite)")]
    NotEmpty(String),
    #[error("unknown split `{0}`")]
    UnknownSplit(String),
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectClass {
    Building,
    Pond,
    Road,
    Tree,
    Vehicle,
    Field,
    Tank,
    Bridge,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 8] = [
        ObjectClass::Building,
        ObjectClass::Pond,
        ObjectClass::Road,
        ObjectClass::Tree,
        ObjectClass::Vehicle,
        ObjectClass::Field,
        ObjectClass::Tank,
        ObjectClass::Bridge,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ObjectClass::Building => "building",
            ObjectClass::Pond => "pond",
            ObjectClass::Road => "road",
            ObjectClass::Tree => "tree",
            ObjectClass::Vehicle => "vehicle",
            ObjectClass::Field => "field",
            ObjectClass::Tank => "tank",
            ObjectClass::Bridge => "bridge",
        }
    }

    pub fn plural(self) -> String {
        format!("{}s", self.name())
    }

    /// Nominal fill color; scenes jitter it slightly.
    pub fn color(self) -> [f64; 3] {
        match self {
            ObjectClass::Building => [0.60, 0.60, 0.65],
            ObjectClass::Pond => [0.15, 0.35, 0.80],
            ObjectClass::Road => [0.20, 0.20, 0.20],
            ObjectClass::Tree => [0.10, 0.40, 0.10],
            ObjectClass::Vehicle => [0.90, 0.10, 0.10],
            ObjectClass::Field => [0.75, 0.85, 0.30],
            ObjectClass::Tank => [0.95, 0.95, 0.95],
            ObjectClass::Bridge => [0.55, 0.35, 0.15],
        }
    }

    /// Pixel ranges `((long_min, long_max), (short_min, short_max))` of the
    /// box sides.
    pub fn size_range(self) -> ((i64, i64), (i64, i64)) {
        match self {
            ObjectClass::Building => ((8, 14), (8, 14)),
            ObjectClass::Pond => ((10, 18), (8, 14)),
            ObjectClass::Road => ((30, 50), (4, 6)),
            ObjectClass::Tree => ((4, 7), (4, 7)),
            ObjectClass::Vehicle => ((3, 5), (2, 4)),
            ObjectClass::Field => ((16, 26), (14, 22)),
            ObjectClass::Tank => ((6, 10), (6, 10)),
            ObjectClass::Bridge => ((14, 22), (4, 6)),
        }
    }

    /// Long thin shapes that may be placed vertically.
    pub fn is_elongated(self) -> bool {
        matches!(self, ObjectClass::Road | ObjectClass::Vehicle | ObjectClass::Bridge)
    }

    /// Drawn as an ellipse inscribed in the box.
    pub fn is_round(self) -> bool {
        matches!(self, ObjectClass::Pond | ObjectClass::Tank | ObjectClass::Tree)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Background {
    Grassland,
    Desert,
    Wasteland,
}

impl Background {
    pub const ALL: [Background; 3] = [Background::Grassland, Background::Desert, Background::Wasteland];

    pub fn name(self) -> &'static str {
        match self {
            Background::Grassland => "grassland",
            Background::Desert => "desert",
            Background::Wasteland => "wasteland",
        }
    }

    pub fn color(self) -> [f64; 3] {
        match self {
            Background::Grassland => [0.35, 0.55, 0.25],
            Background::Desert => [0.85, 0.75, 0.50],
            Background::Wasteland => [0.50, 0.45, 0.40],
        }
    }
}

/// Index lists of the three splits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle of `0..count`, then a contiguous cut into train, val and
/// test. Val and test each get `⌊count/10⌋`; train gets the rest.
pub fn split_dataset(count: usize, seed: u64) -> Result<Splits, DatasetError> {
    if count < MIN_SPLIT_SIZE {
        return Err(DatasetError::TooFew(count));
    }
    let mut order: Vec<usize> = (0..count).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let tenth = count / 10;
    let train_len = count - 2 * tenth;
    let test = order.split_off(train_len + tenth);
    let val = order.split_off(train_len);
    Ok(Splits {
        train: order,
        val,
        test,
    })
}

/// Vocabulary over every caption of the given samples.
pub fn build_vocabulary(samples: &[CaptionSample]) -> Vocabulary {
    let captions: Vec<&str> = samples.iter().flat_map(|s| s.captions.iter().map(String::as_str)).collect();
    Vocabulary::build(&captions)
}
