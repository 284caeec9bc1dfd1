use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{bleu, cider_per_image, rouge_l_per_image, sentence_bleu, Corpus, MetricError};

/// The six corpus scores, in the column order B-1 B-2 B-3 B-4 C R.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    #[serde(rename = "B-1")]
    pub bleu1: f64,
    #[serde(rename = "B-2")]
    pub bleu2: f64,
    #[serde(rename = "B-3")]
    pub bleu3: f64,
    #[serde(rename = "B-4")]
    pub bleu4: f64,
    #[serde(rename = "C")]
    pub cider: f64,
    #[serde(rename = "R")]
    pub rouge_l: f64,
}

impl Scores {
    pub const COLUMNS: [&'static str; 6] = ["B-1", "B-2", "B-3", "B-4", "C", "R"];

    pub fn values(&self) -> [f64; 6] {
        [self.bleu1, self.bleu2, self.bleu3, self.bleu4, self.cider, self.rouge_l]
    }

    fn from_parts(b: &[f64], cider: f64, rouge_l: f64) -> Self {
        Self {
            bleu1: b[0],
            bleu2: b[1],
            bleu3: b[2],
            bleu4: b[3],
            cider,
            rouge_l,
        }
    }

    /// Finite, BLEU and ROUGE-L in `[0, 1]`, CIDEr non-negative.
    pub fn is_valid(&self) -> bool {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        self.values().iter().all(|x| x.is_finite())
            && [self.bleu1, self.bleu2, self.bleu3, self.bleu4, self.rouge_l]
                .into_iter()
                .all(unit)
            && self.cider >= 0.0
    }
}

/// Scores of one image scored on its own (CIDEr keeps the corpus IDF).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageScores {
    pub image_id: String,
    pub candidate: String,
    pub scores: Scores,
}

/// Corpus scores plus the per-image breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: String,
    pub images: usize,
    pub scores: Scores,
    pub per_image: Vec<ImageScores>,
}

impl EvalReport {
    /// Scores `candidates` (one caption per image) against `references`.
    pub fn compute<S: AsRef<str>, R: AsRef<str>>(
        split: &str,
        image_ids: &[S],
        candidates: &[S],
        references: &[Vec<R>],
    ) -> Result<Self, MetricError> {
        if image_ids.len() != candidates.len() {
            return Err(MetricError::LengthMismatch {
                candidates: candidates.len(),
                references: image_ids.len(),
            });
        }
        let corpus = Corpus::from_text(candidates, references)?;
        let b = bleu(&corpus, 4);
        let c = cider_per_image(&corpus);
        let r = rouge_l_per_image(&corpus);
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let scores = Scores::from_parts(&b, mean(&c), mean(&r));
        let per_image = (0..corpus.len())
            .map(|i| ImageScores {
                image_id: image_ids[i].as_ref().to_string(),
                candidate: candidates[i].as_ref().to_string(),
                scores: Scores::from_parts(&sentence_bleu(&corpus, i, 4), c[i], r[i]),
            })
            .collect();
        Ok(Self {
            split: split.to_string(),
            images: corpus.len(),
            scores,
            per_image,
        })
    }

    /// Aligned text table: one header row and one score row.
    pub fn table(&self) -> String {
        let mut out = String::new();
        for c in Scores::COLUMNS {
            let _ = write!(out, "{c:>8}");
        }
        out.push('\n');
        for v in self.scores.values() {
            let _ = write!(out, "{v:>8.4}");
        }
        out.push('\n');
        out
    }
}
