use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decoder::{DecoderDims, LstmInput};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{key} = {value}: {reason}")]
    Invalid {
        key: &'static str,
        value: String,
        reason: &'static str,
    },
    #[error("config file: {0}")]
    Parse(String),
}

/// Model widths and training hyper-parameters.
///
/// The defaults for `k`, `n`, `lr` and `beam` are the reference settings.
/// The widths are free choices sized for the synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Feature and word-embedding width `d`.
    pub d: usize,
    /// LSTM hidden width `H`.
    pub hidden: usize,
    /// Attention hidden width `A`.
    pub attention: usize,
    /// Word-prediction hidden width `P`.
    pub output: usize,
    /// Object proposals per image.
    pub n: usize,
    /// Patch scale factor.
    pub k: f64,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub lstm_input: LstmInput,
    /// Beam width for captioning and evaluation.
    pub beam: usize,
    /// Cap on emitted tokens per caption, `<end>` included.
    pub max_len: usize,
    /// How many of each image's captions become training pairs.
    pub captions_per_image: usize,
    /// Global gradient-norm ceiling.
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            d: 64,
            hidden: 64,
            attention: 64,
            output: 64,
            n: 5,
            k: 2.0,
            lr: 1e-4,
            epochs: 30,
            seed: 0,
            lstm_input: LstmInput::default(),
            beam: 2,
            max_len: 16,
            captions_per_image: 5,
            clip_norm: 5.0,
        }
    }
}

impl TrainConfig {
    /// Settings for memorizing a handful of scenes: the reference `k`, `n`,
    /// `lr` and `beam`, one caption per image, and widths large enough for
    /// 300 epochs at `lr = 1e-4` to drive the loss close to zero.
    pub fn memorization() -> Self {
        Self {
            d: 512,
            hidden: 256,
            attention: 32,
            output: 512,
            epochs: 300,
            seed: 7,
            captions_per_image: 1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |key, value: String, reason| Err(ConfigError::Invalid { key, value, reason });
        for (key, v) in [
            ("d", self.d),
            ("hidden", self.hidden),
            ("attention", self.attention),
            ("output", self.output),
            ("beam", self.beam),
            ("max_len", self.max_len),
        ] {
            if v == 0 {
                return invalid(key, v.to_string(), "must be at least 1");
            }
        }
        if self.seed > i64::MAX as u64 {
            return invalid("seed", self.seed.to_string(), "must fit in a signed 64-bit integer");
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return invalid("k", self.k.to_string(), "must be positive");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return invalid("lr", self.lr.to_string(), "must be non-negative");
        }
        if self.clip_norm.is_nan() || self.clip_norm <= 0.0 {
            return invalid("clip_norm", self.clip_norm.to_string(), "must be positive");
        }
        if !(1..=5).contains(&self.captions_per_image) {
            return invalid(
                "captions_per_image",
                self.captions_per_image.to_string(),
                "must be between 1 and 5",
            );
        }
        Ok(())
    }

    pub fn dims(&self, vocab: usize) -> DecoderDims {
        DecoderDims {
            feature: self.d,
            hidden: self.hidden,
            attention: self.attention,
            output: self.output,
            vocab,
            lstm_input: self.lstm_input,
        }
    }

    /// Parses `key = value` lines; unknown keys are rejected and missing
    /// keys keep their defaults.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every field as `key = value`, one per line.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }
}
