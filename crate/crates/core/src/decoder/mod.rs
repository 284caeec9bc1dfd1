//! Cross-hierarchy attention LSTM decoder.
//!
//! At every step the previous hidden state and word embedding score each
//! slot of the feature stack (objects, patches, global), a softmax turns the
//! scores into weights, and the weighted slot average conditions both the
//! next word distribution and the recurrence.
//!
//! Two readings differ from many captioners and are kept on purpose: the
//! word distribution pairs `C_t` with `h_{t-1}` rather than `h_t`, and the
//! attention scores carry no bias term.

pub(crate) mod cell;
mod dump;
mod params;
mod search;
mod vocab;

pub use cell::Features;
pub use dump::{attention_trace, write_attention_dump, AttentionRecord};
pub use params::{DecoderDims, DecoderParams, LstmInput};
pub use search::{beam_search, greedy_search, sequence_log_prob, Hypothesis, SearchError, StepModel};
pub use vocab::{Vocabulary, END, PAD, START, UNK};

use thiserror::Error;

use crate::autograd::{log_softmax, softmax, Tape, Tensor, TensorError, Var};
use crate::features::{FeatureError, FeatureStack};
use cell::{Bound, SlotVars, StateVars};

#[derive(Debug, Error)]
pub enum DecoderError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("{what}: expected {expected}, found {found}")]
    Dim {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("token {token} outside vocabulary of {vocab}")]
    Token { token: usize, vocab: usize },
    #[error("parameter array `{0}` is missing")]
    MissingArray(String),
    #[error("parameter array `{name}` has shape {found:?}, expected {expected:?}")]
    ArrayShape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Recurrent state between steps.
///
/// Before step `t` it holds `h_{t-2}`, `c_{t-2}`, the previous context
/// `C_{t-1}` and word `w_{t-1}`; after the step `h`, `c` have advanced one
/// position and `alpha`, `context` hold `α_t`, `C_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub alpha: Vec<f64>,
    pub context: Vec<f64>,
    pub prev_token: usize,
}

/// Uniform attention over all `2n+1` slots, `C_0` as the matching weighted
/// mean of the rows, zero recurrent state and `<start>` as previous word.
pub fn init_state(stack: &FeatureStack, hidden: usize) -> Result<DecoderState, DecoderError> {
    let slots = stack.slots();
    let alpha = vec![1.0 / slots as f64; slots];
    let context = context_vector(stack, &alpha)?;
    Ok(DecoderState {
        h: vec![0.0; hidden],
        c: vec![0.0; hidden],
        alpha,
        context,
        prev_token: START,
    })
}

/// Softmax over slot scores.
pub fn attention_weights(scores: &[f64]) -> Result<Vec<f64>, DecoderError> {
    Ok(softmax(scores)?)
}

/// `Σ_i α_i F_i`.
pub fn context_vector(stack: &FeatureStack, alpha: &[f64]) -> Result<Vec<f64>, DecoderError> {
    if alpha.len() != stack.slots() {
        return Err(DecoderError::Dim {
            what: "attention weights",
            expected: stack.slots(),
            found: alpha.len(),
        });
    }
    let a = Tensor::row(alpha);
    Ok(a.matmul(&stack.to_tensor())?.into_data())
}

fn with_constants<T>(
    params: &DecoderParams,
    f: impl FnOnce(&mut Tape, &Bound) -> Result<T, DecoderError>,
) -> Result<T, DecoderError> {
    let mut tape = Tape::new();
    let bound = Bound::bind(&mut tape, params, false);
    f(&mut tape, &bound)
}

fn row_var(tape: &mut Tape, v: &[f64], expected: usize, what: &'static str) -> Result<Var, DecoderError> {
    if v.len() != expected {
        return Err(DecoderError::Dim {
            what,
            expected,
            found: v.len(),
        });
    }
    Ok(tape.constant(Tensor::row(v)))
}

/// One score per slot: `w_hᵀ tanh(W_a [F_i ; h_prev ; e_prev])`.
pub fn attention_scores(
    stack: &FeatureStack,
    h_prev: &[f64],
    e_prev: &[f64],
    params: &DecoderParams,
) -> Result<Vec<f64>, DecoderError> {
    let dims = params.dims();
    with_constants(params, |tape, bound| {
        let slots = cell::slots_on_tape(tape, bound, Features::Stack(stack))?;
        let h = row_var(tape, h_prev, dims.hidden, "hidden state")?;
        let e = row_var(tape, e_prev, dims.feature, "word embedding")?;
        let s = cell::scores_on_tape(tape, bound, slots, h, e)?;
        Ok(tape.value(s).data().to_vec())
    })
}

/// Advances the recurrence from `state`, feeding `C_{t-1}` (and the
/// embedding of `prev_token` when configured). Returns `(h, c)`.
pub fn lstm_step(state: &DecoderState, params: &DecoderParams) -> Result<(Vec<f64>, Vec<f64>), DecoderError> {
    let dims = params.dims();
    with_constants(params, |tape, bound| {
        let context = row_var(tape, &state.context, dims.feature, "context")?;
        let h = row_var(tape, &state.h, dims.hidden, "hidden state")?;
        let c = row_var(tape, &state.c, dims.hidden, "cell state")?;
        let e = cell::embed(tape, bound, state.prev_token)?;
        let input = cell::lstm_input_on_tape(tape, dims.lstm_input, context, e)?;
        let (h2, c2) = cell::lstm_on_tape(tape, bound, input, h, c)?;
        Ok((tape.value(h2).data().to_vec(), tape.value(c2).data().to_vec()))
    })
}

/// `softmax(U_p tanh(W_p [C_t ; h_prev] + b_p))`.
pub fn word_distribution(context: &[f64], h_prev: &[f64], params: &DecoderParams) -> Result<Vec<f64>, DecoderError> {
    let dims = params.dims();
    with_constants(params, |tape, bound| {
        let c = row_var(tape, context, dims.feature, "context")?;
        let h = row_var(tape, h_prev, dims.hidden, "hidden state")?;
        let logits = cell::logits_on_tape(tape, bound, c, h)?;
        Ok(softmax(tape.value(logits).data())?)
    })
}

/// Output of one [`Decoder::step`].
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub probs: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub state: DecoderState,
}

/// Frozen parameters bound to one image, ready for repeated stepping.
pub struct Decoder {
    tape: Tape,
    bound: Bound,
    slots: SlotVars,
    base: usize,
}

impl Decoder {
    pub fn new(params: &DecoderParams, features: Features<'_>) -> Result<Self, DecoderError> {
        let mut tape = Tape::new();
        let bound = Bound::bind(&mut tape, params, false);
        let slots = cell::slots_on_tape(&mut tape, &bound, features)?;
        let base = tape.len();
        Ok(Self {
            tape,
            bound,
            slots,
            base,
        })
    }

    pub fn dims(&self) -> DecoderDims {
        self.bound.dims
    }

    /// The `(2n+1) × d` slot matrix this decoder attends over.
    pub fn feature_matrix(&self) -> &Tensor {
        self.tape.value(self.slots.feats)
    }

    pub fn init_state(&mut self) -> Result<DecoderState, DecoderError> {
        self.tape.truncate(self.base);
        let s = cell::init_state_on_tape(&mut self.tape, self.slots, self.bound.dims.hidden)?;
        Ok(self.read_state(&s))
    }

    /// Runs one step from `state`. The returned state still carries the old
    /// `prev_token`; set it to the chosen word before the next step.
    pub fn step(&mut self, state: &DecoderState) -> Result<StepOutput, DecoderError> {
        let dims = self.bound.dims;
        self.tape.truncate(self.base);
        let n = self.slots_len();
        let vars = StateVars {
            h: row_var(&mut self.tape, &state.h, dims.hidden, "hidden state")?,
            c: row_var(&mut self.tape, &state.c, dims.hidden, "cell state")?,
            context: row_var(&mut self.tape, &state.context, dims.feature, "context")?,
            alpha: row_var(&mut self.tape, &state.alpha, n, "attention weights")?,
            prev_token: state.prev_token,
        };
        let (logits, next) = cell::step_on_tape(&mut self.tape, &self.bound, self.slots, &vars)?;
        let raw = self.tape.value(logits).data();
        let probs = softmax(raw)?;
        let log_probs = log_softmax(raw)?;
        let state = self.read_state(&next);
        Ok(StepOutput {
            probs,
            log_probs,
            state,
        })
    }

    fn slots_len(&self) -> usize {
        self.tape.value(self.slots.feats).rows()
    }

    fn read_state(&self, s: &StateVars) -> DecoderState {
        let v = |x: Var| self.tape.value(x).data().to_vec();
        DecoderState {
            h: v(s.h),
            c: v(s.c),
            alpha: v(s.alpha),
            context: v(s.context),
            prev_token: s.prev_token,
        }
    }
}

/// One decoding step for a single image.
pub fn step(
    state: &DecoderState,
    features: Features<'_>,
    params: &DecoderParams,
) -> Result<StepOutput, DecoderError> {
    Decoder::new(params, features)?.step(state)
}

impl StepModel for Decoder {
    type State = DecoderState;
    type Error = DecoderError;

    fn end_token(&self) -> usize {
        END
    }

    fn initial(&mut self) -> Result<DecoderState, DecoderError> {
        self.init_state()
    }

    fn log_probs(&mut self, state: &DecoderState) -> Result<(Vec<f64>, DecoderState), DecoderError> {
        let out = self.step(state)?;
        Ok((out.log_probs, out.state))
    }

    fn advance(&self, mut state: DecoderState, token: usize) -> DecoderState {
        state.prev_token = token;
        state
    }
}

/// Argmax word at every step (lowest index on ties) until `<end>` or
/// `max_len` emitted tokens. Returns the words without `<start>`/`<end>`.
pub fn greedy_decode(
    params: &DecoderParams,
    features: Features<'_>,
    max_len: usize,
) -> Result<Vec<usize>, DecoderError> {
    let mut dec = Decoder::new(params, features)?;
    Ok(greedy_search(&mut dec, max_len)?.surface(END))
}

/// Length-normalized beam search; see [`beam_search`].
pub fn beam_decode(
    params: &DecoderParams,
    features: Features<'_>,
    beam: usize,
    max_len: usize,
) -> Result<Vec<usize>, DecoderError> {
    let mut dec = Decoder::new(params, features)?;
    Ok(beam_search(&mut dec, beam, max_len)?.surface(END))
}


#[cfg(test)]
mod tests;
