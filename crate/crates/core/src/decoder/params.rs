use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autograd::Tensor;
use crate::features::RAW_DIM;

use super::DecoderError;

/// What the recurrent cell consumes besides its own hidden state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LstmInput {
    /// `C_{t-1}` alone.
    ContextOnly,
    /// `[C_{t-1} ; e_{t-1}]`.
    #[default]
    ContextPlusEmbedding,
}

impl LstmInput {
    pub fn as_str(self) -> &'static str {
        match self {
            LstmInput::ContextOnly => "context_only",
            LstmInput::ContextPlusEmbedding => "context_plus_embedding",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "context_only" => Some(LstmInput::ContextOnly),
            "context_plus_embedding" => Some(LstmInput::ContextPlusEmbedding),
            _ => None,
        }
    }
}

/// Layer widths of the decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DecoderDims {
    /// Feature and embedding width `d`.
    pub feature: usize,
    /// LSTM hidden width `H`.
    pub hidden: usize,
    /// Attention hidden width `A`.
    pub attention: usize,
    /// Word-prediction hidden width `P`.
    pub output: usize,
    pub vocab: usize,
    pub lstm_input: LstmInput,
}

impl DecoderDims {
    pub fn lstm_in(&self) -> usize {
        match self.lstm_input {
            LstmInput::ContextOnly => self.feature,
            LstmInput::ContextPlusEmbedding => 2 * self.feature,
        }
    }

    /// Shape of the named parameter array.
    pub fn shape_of(&self, name: &str) -> [usize; 2] {
        let (d, h, a, p, v) = (self.feature, self.hidden, self.attention, self.output, self.vocab);
        match name {
            "proj_object" | "proj_patch" | "proj_global" => [RAW_DIM, d],
            "embedding" => [v, d],
            "attn_w" => [d + h + d, a],
            "attn_v" => [a, 1],
            "lstm_wx" => [self.lstm_in(), 4 * h],
            "lstm_wh" => [h, 4 * h],
            "lstm_b" => [1, 4 * h],
            "out_w" => [d + h, p],
            "out_b" => [1, p],
            "out_u" => [p, v],
            other => unreachable!("unknown parameter {other}"),
        }
    }

    /// Fan-in used by the uniform initializer.
    fn fan_in(&self, name: &str) -> usize {
        match name {
            "lstm_wx" | "lstm_wh" | "lstm_b" => self.lstm_in() + self.hidden,
            "out_b" => self.feature + self.hidden,
            _ => self.shape_of(name)[0],
        }
    }
}

/// Every trainable array of the captioner, in a fixed order.
///
/// All matrices act on row vectors from the right (`x · W`), so the
/// attention map `W_a` is stored as `(2d+H) × A` and `U_p` as `P × |V|`.
/// LSTM gate columns are ordered input, forget, candidate, output.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderParams {
    dims: DecoderDims,
    arrays: Vec<Tensor>,
}

impl DecoderParams {
    pub const NAMES: [&'static str; 12] = [
        "proj_object",
        "proj_patch",
        "proj_global",
        "embedding",
        "attn_w",
        "attn_v",
        "lstm_wx",
        "lstm_wh",
        "lstm_b",
        "out_w",
        "out_b",
        "out_u",
    ];

    fn names() -> &'static [&'static str] {
        &Self::NAMES
    }

    pub fn zeros(dims: DecoderDims) -> Self {
        let arrays = Self::names()
            .iter()
            .map(|n| Tensor::zeros(&dims.shape_of(n)))
            .collect();
        Self { dims, arrays }
    }

    /// Uniform(−s, s) with `s = 1/√fan_in` for every array.
    pub fn init(dims: DecoderDims, rng: &mut ChaCha8Rng) -> Self {
        let arrays = Self::names()
            .iter()
            .map(|n| {
                let shape = dims.shape_of(n);
                let s = 1.0 / (dims.fan_in(n) as f64).sqrt();
                let data = (0..shape[0] * shape[1]).map(|_| rng.gen_range(-s..s)).collect();
                Tensor::new(shape.to_vec(), data).expect("positive dims")
            })
            .collect();
        Self { dims, arrays }
    }

    /// Assembles parameters from named arrays, checking every shape.
    pub fn from_named(
        dims: DecoderDims,
        mut lookup: impl FnMut(&str) -> Option<Tensor>,
    ) -> Result<Self, DecoderError> {
        let mut arrays = Vec::new();
        for name in Self::names() {
            let t = lookup(name).ok_or_else(|| DecoderError::MissingArray(name.to_string()))?;
            let expected = dims.shape_of(name).to_vec();
            if t.shape() != expected.as_slice() {
                return Err(DecoderError::ArrayShape {
                    name: name.to_string(),
                    expected,
                    found: t.shape().to_vec(),
                });
            }
            arrays.push(t);
        }
        Ok(Self { dims, arrays })
    }

    pub fn dims(&self) -> DecoderDims {
        self.dims
    }

    pub fn named(&self) -> impl Iterator<Item = (&'static str, &Tensor)> {
        Self::names().iter().copied().zip(&self.arrays)
    }

    pub fn arrays(&self) -> &[Tensor] {
        &self.arrays
    }

    pub fn arrays_mut(&mut self) -> &mut [Tensor] {
        &mut self.arrays
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        Self::names().iter().position(|n| *n == name).map(|i| &self.arrays[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        Self::names()
            .iter()
            .position(|n| *n == name)
            .map(move |i| &mut self.arrays[i])
    }

    pub fn num_scalars(&self) -> usize {
        self.arrays.iter().map(Tensor::len).sum()
    }
}
