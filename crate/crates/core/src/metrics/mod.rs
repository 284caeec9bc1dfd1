//! Caption metrics: corpus BLEU-1..4, ROUGE-L and CIDEr.
//!
//! All three compare tokenized candidates against several references per
//! image. BLEU is unsmoothed corpus BLEU with the closest-reference brevity
//! penalty, ROUGE-L uses the LCS F-measure with `β = 1.2`, and CIDEr is the
//! plain TF-IDF cosine variant (no length penalty, no count clipping).

mod bleu;
mod cider;
mod report;
mod rouge;
mod tokenize;

pub use bleu::{bleu, sentence_bleu};
pub use cider::{cider, cider_per_image};
pub use report::{EvalReport, ImageScores, Scores};
pub use rouge::{lcs_len, rouge_l, rouge_l_per_image, ROUGE_BETA};
pub use tokenize::tokenize;

use std::collections::HashMap;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("metrics need at least one image")]
    EmptyCorpus,
    #[error("{candidates} candidates but {references} reference sets")]
    LengthMismatch { candidates: usize, references: usize },
    #[error("image {0} has no references")]
    NoReferences(usize),
}

/// Tokenized candidates paired with their reference sets.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    candidates: Vec<Vec<String>>,
    references: Vec<Vec<Vec<String>>>,
}

impl Corpus {
    pub fn new(candidates: Vec<Vec<String>>, references: Vec<Vec<Vec<String>>>) -> Result<Self, MetricError> {
        if candidates.len() != references.len() {
            return Err(MetricError::LengthMismatch {
                candidates: candidates.len(),
                references: references.len(),
            });
        }
        if candidates.is_empty() {
            return Err(MetricError::EmptyCorpus);
        }
        if let Some(i) = references.iter().position(Vec::is_empty) {
            return Err(MetricError::NoReferences(i));
        }
        Ok(Self {
            candidates,
            references,
        })
    }

    /// Tokenizes raw caption text with [`tokenize`].
    pub fn from_text<C: AsRef<str>, R: AsRef<str>>(candidates: &[C], references: &[Vec<R>]) -> Result<Self, MetricError> {
        Self::new(
            candidates.iter().map(|c| tokenize(c.as_ref())).collect(),
            references
                .iter()
                .map(|refs| refs.iter().map(|r| tokenize(r.as_ref())).collect())
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn candidates(&self) -> &[Vec<String>] {
        &self.candidates
    }

    pub fn references(&self) -> &[Vec<Vec<String>>] {
        &self.references
    }

    /// Corpus restricted to a single image.
    pub fn image(&self, i: usize) -> Corpus {
        Corpus {
            candidates: vec![self.candidates[i].clone()],
            references: vec![self.references[i].clone()],
        }
    }
}

/// Occurrence counts of every contiguous `n`-gram.
pub(crate) fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for g in tokens.windows(n) {
            *counts.entry(g).or_insert(0) += 1;
        }
    }
    counts
}
