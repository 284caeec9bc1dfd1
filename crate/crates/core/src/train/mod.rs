//! Teacher-forced cross-entropy training with Adam, evaluation of a trained
//! model on a split, and checkpoint persistence.

mod adam;
mod checkpoint;
mod config;
pub mod gradcheck;

pub use adam::{adam_step, clip_grad_norm, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointError, RngState, CHECKPOINT_VERSION};
pub use config::{ConfigError, TrainConfig};

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::autograd::{Tape, Tensor, Var};
use crate::dataset::CaptionSample;
use crate::decoder::cell::{self, Bound};
use crate::decoder::{
    beam_decode, greedy_decode, DecoderError, DecoderParams, Features, Vocabulary, PAD,
};
use crate::features::{FeatureError, RawFeatures};
use crate::metrics::{bleu, Corpus, EvalReport, MetricError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Decoder(#[from] DecoderError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("training split is empty")]
    EmptySplit,
    #[error("caption needs <start>, at least one target and <end>; got {0} tokens")]
    EmptyCaption(usize),
    #[error("gradient {index} has shape {found:?}, parameter has {expected:?}")]
    GradShape {
        index: usize,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One image ready for training or evaluation: raw region descriptors,
/// framed token sequences of its captions, and the caption text.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub image_id: String,
    pub features: RawFeatures,
    pub captions: Vec<Vec<usize>>,
    pub references: Vec<String>,
}

/// Extracts features (top-`n` boxes, `k`-scaled patches) and encodes every
/// caption with `vocab`.
pub fn prepare_examples(
    samples: &[CaptionSample],
    vocab: &Vocabulary,
    config: &TrainConfig,
) -> Result<Vec<Example>, TrainError> {
    samples
        .par_iter()
        .map(|s| {
            let features = RawFeatures::extract(&s.raster, &s.scene.boxes(), config.n, config.k)?;
            Ok(Example {
                image_id: s.image_id.clone(),
                features,
                captions: s.captions.iter().map(|c| vocab.frame(&vocab.encode(c))).collect(),
                references: s.captions.to_vec(),
            })
        })
        .collect()
}

/// Mean cross-entropy of the gold next word over the steps of a framed
/// caption, feeding gold previous words. `<pad>` targets are skipped.
fn loss_on_tape(
    tape: &mut Tape,
    bound: &Bound,
    features: Features<'_>,
    caption: &[usize],
) -> Result<Var, TrainError> {
    let targets = caption.iter().skip(1).filter(|&&t| t != PAD).count();
    if caption.len() < 2 || targets == 0 {
        return Err(TrainError::EmptyCaption(caption.len()));
    }
    let slots = cell::slots_on_tape(tape, bound, features)?;
    let mut state = cell::init_state_on_tape(tape, slots, bound.dims.hidden)?;
    state.prev_token = caption[0];
    let mut terms = Vec::with_capacity(targets);
    for &target in &caption[1..] {
        let (logits, mut next) = cell::step_on_tape(tape, bound, slots, &state)?;
        if target != PAD {
            terms.push(tape.cross_entropy(logits, target).map_err(DecoderError::from)?);
        }
        next.prev_token = target;
        state = next;
    }
    let stacked = tape.concat_cols(&terms).map_err(DecoderError::from)?;
    let total = tape.sum(stacked);
    Ok(tape.scale(total, 1.0 / targets as f64))
}

/// Value of the teacher-forced loss.
pub fn teacher_forced_loss(
    params: &DecoderParams,
    features: Features<'_>,
    caption: &[usize],
) -> Result<f64, TrainError> {
    let mut tape = Tape::new();
    let bound = Bound::bind(&mut tape, params, false);
    let loss = loss_on_tape(&mut tape, &bound, features, caption)?;
    Ok(tape.value(loss).item())
}

/// Loss and its gradient for every parameter array, in parameter order.
pub fn loss_and_gradients(
    params: &DecoderParams,
    features: Features<'_>,
    caption: &[usize],
) -> Result<(f64, Vec<Tensor>), TrainError> {
    let mut tape = Tape::new();
    let bound = Bound::bind(&mut tape, params, true);
    let loss = loss_on_tape(&mut tape, &bound, features, caption)?;
    tape.backward(loss).map_err(DecoderError::from)?;
    Ok((tape.value(loss).item(), bound.grads(&tape)))
}

/// One row of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_bleu4: Option<f64>,
}

pub const LOG_HEADER: &str = "epoch,train_loss,val_bleu4";

impl EpochLog {
    /// CSV row; an empty validation split leaves the last column blank.
    pub fn csv_row(&self) -> String {
        match self.val_bleu4 {
            Some(b) => format!("{},{},{}", self.epoch, self.train_loss, b),
            None => format!("{},{},", self.epoch, self.train_loss),
        }
    }
}

pub fn write_log_csv(path: &Path, log: &[EpochLog]) -> Result<(), TrainError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{LOG_HEADER}")?;
    for row in log {
        writeln!(out, "{}", row.csv_row())?;
    }
    out.flush()?;
    Ok(())
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Snapshot from the epoch with the best validation BLEU-4 (the last
    /// epoch when there is no validation split).
    pub best: Checkpoint,
    /// Snapshot after the final epoch.
    pub last: Checkpoint,
    pub log: Vec<EpochLog>,
}

/// Corpus BLEU-4 of greedy captions against each example's references.
pub fn greedy_bleu4(params: &DecoderParams, vocab: &Vocabulary, examples: &[Example], max_len: usize) -> Result<f64, TrainError> {
    let candidates = examples
        .par_iter()
        .map(|e| Ok(vocab.decode(&greedy_decode(params, Features::Raw(&e.features), max_len)?)))
        .collect::<Result<Vec<String>, TrainError>>()?;
    let refs: Vec<Vec<String>> = examples.iter().map(|e| e.references.clone()).collect();
    Ok(bleu(&Corpus::from_text(&candidates, &refs)?, 4)[3])
}

/// Trains from a fresh seeded initialization.
///
/// Every epoch shuffles the (image, caption) pairs, taking the first
/// `captions_per_image` captions of each image, and applies one clipped
/// Adam step per pair. `on_epoch` sees each log row as soon as it exists.
pub fn train(
    config: &TrainConfig,
    vocab: &Vocabulary,
    train_set: &[Example],
    val_set: &[Example],
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(TrainError::EmptySplit);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = DecoderParams::init(config.dims(vocab.len()), &mut rng);
    let mut adam = AdamState::new(params.arrays());

    let pairs: Vec<(usize, usize)> = train_set
        .iter()
        .enumerate()
        .flat_map(|(i, e)| (0..e.captions.len().min(config.captions_per_image)).map(move |c| (i, c)))
        .collect();

    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut losses = vec![0.0; pairs.len()];

    let snapshot = |params: &DecoderParams, adam: &AdamState, rng: &ChaCha8Rng, epoch: usize| Checkpoint {
        config: config.clone(),
        vocab: vocab.clone(),
        params: params.clone(),
        adam: adam.clone(),
        rng: RngState::of(rng),
        epoch,
    };

    let mut log = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, Checkpoint)> = None;
    let mut last = snapshot(&params, &adam, &rng, 0);
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for &pi in &order {
            let (i, c) = pairs[pi];
            let ex = &train_set[i];
            let (loss, mut grads) = loss_and_gradients(&params, Features::Raw(&ex.features), &ex.captions[c])?;
            clip_grad_norm(&mut grads, config.clip_norm);
            adam_step(params.arrays_mut(), &grads, &mut adam, config.lr)?;
            losses[pi] = loss;
        }
        // Summed in pair order so the epoch loss does not depend on the shuffle.
        let total: f64 = losses.iter().sum();
        let val_bleu4 = if val_set.is_empty() {
            None
        } else {
            Some(greedy_bleu4(&params, vocab, val_set, config.max_len)?)
        };
        let row = EpochLog {
            epoch,
            train_loss: total / pairs.len() as f64,
            val_bleu4,
        };
        on_epoch(&row);
        log.push(row);
        last = snapshot(&params, &adam, &rng, epoch);
        if let Some(score) = val_bleu4 {
            if best.as_ref().is_none_or(|(b, _)| score > *b) {
                best = Some((score, last.clone()));
            }
        }
    }
    let best = best.map_or_else(|| last.clone(), |(_, c)| c);
    Ok(TrainOutcome { best, last, log })
}

/// Caption text for one example, by beam search (`beam = 1` is greedy).
pub fn caption_example(ckpt: &Checkpoint, example: &Example, beam: usize) -> Result<String, TrainError> {
    let tokens = beam_decode(&ckpt.params, Features::Raw(&example.features), beam, ckpt.config.max_len)?;
    Ok(ckpt.vocab.decode(&tokens))
}

/// Decodes every example with `beam` and scores the captions.
pub fn evaluate(ckpt: &Checkpoint, examples: &[Example], beam: usize, split: &str) -> Result<EvalReport, TrainError> {
    let candidates = examples
        .par_iter()
        .map(|e| caption_example(ckpt, e, beam))
        .collect::<Result<Vec<String>, TrainError>>()?;
    let ids: Vec<String> = examples.iter().map(|e| e.image_id.clone()).collect();
    let refs: Vec<Vec<String>> = examples.iter().map(|e| e.references.clone()).collect();
    Ok(EvalReport::compute(split, &ids, &candidates, &refs)?)
}
