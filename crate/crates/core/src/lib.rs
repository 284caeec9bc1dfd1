//! Instance-aware image captioning with cross-hierarchy attention.
//!
//! An image is described by three levels of instance features: the `n`
//! largest object regions, each object's surrounding patch (the box scaled by
//! `k` and clipped to the image), and one whole-image descriptor. These
//! `2n+1` rows form a feature stack. An LSTM decoder attends over all of them
//! at every step, so each word can draw on objects, their surroundings, or
//! the whole scene.
//!
//! | module | contents |
//! |---|---|
//! | [`autograd`] | dense `f64` tensors, a reverse-mode tape, finite-difference checks |
//! | [`features`] | boxes, patch expansion, region descriptors, the feature stack |
//! | [`decoder`] | vocabulary, parameters, the attention step, greedy and beam search |
//! | [`train`] | teacher-forced loss, Adam, training loop, checkpoints, evaluation |
//! | [`metrics`] | corpus BLEU-1..4, ROUGE-L and CIDEr |
//! | [`dataset`] | deterministic synthetic scenes with boxes and five captions each |
//! | [`cli`] | the `cha` command line |
//!
//! ```
//! use cha::dataset::{build_vocabulary, generate_scene};
//! use cha::train::{caption_example, prepare_examples, train, TrainConfig};
//!
//! let samples: Vec<_> = (0..4).map(|i| generate_scene(7, i)).collect();
//! let vocab = build_vocabulary(&samples);
//! let config = TrainConfig { d: 8, hidden: 8, attention: 4, output: 8, epochs: 2, ..TrainConfig::default() };
//! let examples = prepare_examples(&samples, &vocab, &config).unwrap();
//! let outcome = train(&config, &vocab, &examples, &[], |_| {}).unwrap();
//! assert_eq!(outcome.log.len(), 2);
//! let caption = caption_example(&outcome.last, &examples[0], config.beam).unwrap();
//! assert!(caption.split_whitespace().count() <= config.max_len);
//! ```

pub mod autograd;
pub mod features;
pub mod decoder;
pub mod metrics;
pub mod dataset;
pub mod train;
pub mod cli;
