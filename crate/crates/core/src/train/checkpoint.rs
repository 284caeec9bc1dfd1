//! Binary checkpoint format.
//!
//! ```text
//! "CHAC"            magic
//! u32               format version
//! u64 + bytes       manifest: UTF-8 `key = value` text (config, vocabulary,
//!                   optimizer step, RNG position, epoch)
//! u32               array count
//! per array:        u32 name length, name, u32 rank, u64 per dim,
//!                   f64 values in row-major order
//! ```
//!
//! All integers and floats are little-endian.

use std::collections::HashMap;
use std::path::Path;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autograd::Tensor;
use crate::decoder::{DecoderError, DecoderParams, Vocabulary};

use super::{AdamState, TrainConfig};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"CHAC";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint: bad magic bytes")]
    BadMagic,
    #[error("checkpoint format version {found}, this build reads {expected}")]
    Version { found: u32, expected: u32 },
    #[error("checkpoint is truncated")]
    Truncated,
    #[error("checkpoint manifest: {0}")]
    Manifest(String),
    #[error("array `{name}` has shape {found:?}, expected {expected:?}")]
    Shape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("array `{0}` is missing")]
    MissingArray(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Position of a ChaCha8 generator, enough to resume its stream exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn of(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn to_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

/// Everything needed to decode with a trained model or resume training.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub vocab: Vocabulary,
    pub params: DecoderParams,
    pub adam: AdamState,
    pub rng: RngState,
    pub epoch: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    epoch: u64,
    adam_step: u64,
    rng_seed: String,
    rng_stream: String,
    rng_word_pos: String,
    vocab: Vec<String>,
    config: TrainConfig,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn unhex(s: &str) -> Option<[u8; 32]> {
    if s.len() != 64 || !s.is_ascii() {
        return None;
    }
    let mut out = [0u8; 32];
    for (i, o) in out.iter_mut().enumerate() {
        *o = u8::from_str_radix(&s[2 * i..2 * i + 2], 16).ok()?;
    }
    Some(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).ok_or(CheckpointError::Truncated)?;
        let s = self.bytes.get(self.pos..end).ok_or(CheckpointError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self) -> Result<usize, CheckpointError> {
        usize::try_from(self.u64()?).map_err(|_| CheckpointError::Truncated)
    }
}

fn moment_name(kind: &str, name: &str) -> String {
    format!("adam.{kind}.{name}")
}

impl Checkpoint {
    fn arrays(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = self.params.named().map(|(n, t)| (n.to_string(), t)).collect();
        for (kind, moments) in [("m", &self.adam.m), ("v", &self.adam.v)] {
            for ((n, _), t) in self.params.named().zip(moments) {
                out.push((moment_name(kind, n), t));
            }
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let manifest = Manifest {
            epoch: self.epoch as u64,
            adam_step: self.adam.step,
            rng_seed: hex(&self.rng.seed),
            rng_stream: self.rng.stream.to_string(),
            rng_word_pos: self.rng.word_pos.to_string(),
            vocab: self.vocab.content_words().to_vec(),
            config: self.config.clone(),
        };
        let text = toml::to_string(&manifest).expect("manifest serializes");
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(text.len() as u64).to_le_bytes());
        out.extend_from_slice(text.as_bytes());
        let arrays = self.arrays();
        out.extend_from_slice(&(arrays.len() as u32).to_le_bytes());
        for (name, t) in arrays {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &x in t.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        if bytes.len() < MAGIC.len() {
            return Err(CheckpointError::Truncated);
        }
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(CheckpointError::Version {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let manifest_len = r.len()?;
        let text = std::str::from_utf8(r.take(manifest_len)?).map_err(|e| CheckpointError::Manifest(e.to_string()))?;
        let m: Manifest = toml::from_str(text).map_err(|e| CheckpointError::Manifest(e.to_string()))?;
        m.config.validate().map_err(|e| CheckpointError::Manifest(e.to_string()))?;
        let bad = |what: &str| CheckpointError::Manifest(format!("invalid {what}"));
        let rng = RngState {
            seed: unhex(&m.rng_seed).ok_or_else(|| bad("rng_seed"))?,
            stream: m.rng_stream.parse().map_err(|_| bad("rng_stream"))?,
            word_pos: m.rng_word_pos.parse().map_err(|_| bad("rng_word_pos"))?,
        };
        let vocab = Vocabulary::from_words(m.vocab);

        let count = r.u32()? as usize;
        let mut arrays: HashMap<String, Tensor> = HashMap::with_capacity(count);
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec()).map_err(|e| CheckpointError::Manifest(e.to_string()))?;
            let rank = r.u32()? as usize;
            let mut shape = Vec::with_capacity(rank.min(8));
            for _ in 0..rank {
                shape.push(r.len()?);
            }
            let n = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or(CheckpointError::Truncated)?;
            let raw = r.take(n.checked_mul(8).ok_or(CheckpointError::Truncated)?)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            let t = Tensor::new(shape.clone(), data).map_err(|_| CheckpointError::Shape {
                name: name.clone(),
                expected: Vec::new(),
                found: shape,
            })?;
            arrays.insert(name, t);
        }
        if r.pos != bytes.len() {
            return Err(CheckpointError::Manifest(format!(
                "{} unexpected trailing bytes",
                bytes.len() - r.pos
            )));
        }

        let dims = m.config.dims(vocab.len());
        let params = DecoderParams::from_named(dims, |n| arrays.get(n).cloned()).map_err(|e| match e {
            DecoderError::ArrayShape { name, expected, found } => CheckpointError::Shape { name, expected, found },
            DecoderError::MissingArray(name) => CheckpointError::MissingArray(name),
            other => CheckpointError::Manifest(other.to_string()),
        })?;
        let mut moments = |kind: &str| -> Result<Vec<Tensor>, CheckpointError> {
            params
                .named()
                .map(|(n, p)| {
                    let key = moment_name(kind, n);
                    let t = arrays.remove(&key).ok_or_else(|| CheckpointError::MissingArray(key.clone()))?;
                    if t.shape() != p.shape() {
                        return Err(CheckpointError::Shape {
                            name: key,
                            expected: p.shape().to_vec(),
                            found: t.shape().to_vec(),
                        });
                    }
                    Ok(t)
                })
                .collect()
        };
        let adam = AdamState {
            m: moments("m")?,
            v: moments("v")?,
            step: m.adam_step,
        };
        Ok(Self {
            config: m.config,
            vocab,
            params,
            adam,
            rng,
            epoch: m.epoch as usize,
        })
    }

    /// Fails with a shape error naming the first array whose shape differs
    /// from what `config` (with this checkpoint's vocabulary) implies.
    pub fn check_config(&self, config: &TrainConfig) -> Result<(), CheckpointError> {
        let dims = config.dims(self.vocab.len());
        for (name, t) in self.params.named() {
            let expected = dims.shape_of(name).to_vec();
            if t.shape() != expected.as_slice() {
                return Err(CheckpointError::Shape {
                    name: name.to_string(),
                    expected,
                    found: t.shape().to_vec(),
                });
            }
        }
        Ok(())
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<(), CheckpointError> {
    std::fs::write(path, ckpt.to_bytes())?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    Checkpoint::from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoder::Vocabulary;

    fn sample() -> Checkpoint {
        let config = TrainConfig {
            d: 4,
            hidden: 3,
            attention: 2,
            output: 5,
            seed: 9,
            ..TrainConfig::default()
        };
        let vocab = Vocabulary::build(&["a pond near a road"]);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let params = DecoderParams::init(config.dims(vocab.len()), &mut rng);
        let mut adam = AdamState::new(params.arrays());
        adam.m[0].data_mut()[0] = 0.25;
        adam.step = 7;
        Checkpoint {
            config,
            vocab,
            params,
            adam,
            rng: RngState::of(&rng),
            epoch: 3,
        }
    }

    #[test]
    fn byte_exact_round_trip() {
        let c = sample();
        let bytes = c.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn rng_resumes_where_it_stopped() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let _: u64 = rng.gen();
        let state = RngState::of(&rng);
        let a: [u64; 4] = rng.gen();
        let b: [u64; 4] = state.to_rng().gen();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_load_errors() {
        let bytes = sample().to_bytes();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bad), Err(CheckpointError::BadMagic)));
        let mut old = bytes.clone();
        old[4] = 99;
        assert!(matches!(
            Checkpoint::from_bytes(&old),
            Err(CheckpointError::Version { found: 99, .. })
        ));
        assert!(matches!(
            Checkpoint::from_bytes(&bytes[..bytes.len() - 3]),
            Err(CheckpointError::Truncated)
        ));
    }

    #[test]
    fn narrower_config_names_the_first_array() {
        let c = sample();
        let narrower = TrainConfig { d: 2, ..c.config.clone() };
        match c.check_config(&narrower) {
            Err(CheckpointError::Shape { name, .. }) => assert_eq!(name, "proj_object"),
            other => panic!("{other:?}"),
        }
        assert!(c.check_config(&c.config).is_ok());
    }
}
