//! Decoder forward pass expressed on a [`Tape`], shared by training,
//! decoding and the gradient checks.

use crate::autograd::{Tape, Tensor, Var};
use crate::features::{FeatureStack, RawFeatures, RAW_DIM};

use super::{DecoderDims, DecoderError, DecoderParams, LstmInput};

/// Where the attention slots come from.
#[derive(Debug, Clone, Copy)]
pub enum Features<'a> {
    /// Raw region descriptors, projected by the trainable per-level maps.
    Raw(&'a RawFeatures),
    /// Externally supplied `(2n+1) × d` stack; projections are bypassed.
    Stack(&'a FeatureStack),
}

impl Features<'_> {
    pub fn slots(&self) -> usize {
        match self {
            Features::Raw(r) => 2 * r.n() + 1,
            Features::Stack(s) => s.slots(),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Features::Raw(r) => r.n(),
            Features::Stack(s) => s.n(),
        }
    }
}

/// Parameters registered on a tape.
#[derive(Debug, Clone)]
pub(crate) struct Bound {
    pub vars: Vec<Var>,
    pub dims: DecoderDims,
}

impl Bound {
    pub fn bind(tape: &mut Tape, params: &DecoderParams, trainable: bool) -> Self {
        let vars = params
            .arrays()
            .iter()
            .map(|t| tape.leaf(t.clone(), trainable))
            .collect();
        Self {
            vars,
            dims: params.dims(),
        }
    }

    fn var(&self, name: &str) -> Var {
        let i = DecoderParams::NAMES
            .iter()
            .position(|n| *n == name)
            .expect("known parameter name");
        self.vars[i]
    }

    /// Gradients in parameter order; zeros for arrays that did not take part.
    pub fn grads(&self, tape: &Tape) -> Vec<Tensor> {
        self.vars
            .iter()
            .map(|&v| tape.grad(v).unwrap_or_else(|| Tensor::zeros(tape.value(v).shape())))
            .collect()
    }
}

/// Recurrent state as tape handles.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StateVars {
    pub h: Var,
    pub c: Var,
    pub context: Var,
    pub alpha: Var,
    pub prev_token: usize,
}

/// Slot matrix `F_a` plus the `(2n+1) × 1` column of ones used to repeat
/// `h` and `e` across slots.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SlotVars {
    pub feats: Var,
    pub ones: Var,
}

pub(crate) fn slots_on_tape(
    tape: &mut Tape,
    bound: &Bound,
    features: Features<'_>,
) -> Result<SlotVars, DecoderError> {
    let d = bound.dims.feature;
    let feats = match features {
        Features::Raw(raw) => {
            let project = |tape: &mut Tape, rows: &[[f64; RAW_DIM]], name: &str| {
                let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
                let raw = tape.constant(Tensor::matrix(rows.len(), RAW_DIM, data)?);
                tape.matmul(raw, bound.var(name))
            };
            let mut parts = Vec::with_capacity(3);
            if raw.n() > 0 {
                parts.push(project(tape, &raw.objects, "proj_object")?);
                parts.push(project(tape, &raw.patches, "proj_patch")?);
            }
            parts.push(project(tape, std::slice::from_ref(&raw.global), "proj_global")?);
            tape.concat_rows(&parts)?
        }
        Features::Stack(stack) => {
            if stack.dim() != d {
                return Err(DecoderError::Dim {
                    what: "feature stack width",
                    expected: d,
                    found: stack.dim(),
                });
            }
            tape.constant(stack.to_tensor())
        }
    };
    let slots = tape.value(feats).rows();
    let ones = tape.constant(Tensor::filled(&[slots, 1], 1.0));
    Ok(SlotVars { feats, ones })
}

/// Uniform attention over all slots and the matching mean context `C_0`.
pub(crate) fn init_state_on_tape(tape: &mut Tape, slots: SlotVars, hidden: usize) -> Result<StateVars, DecoderError> {
    let n = tape.value(slots.feats).rows();
    let alpha = tape.constant(Tensor::filled(&[1, n], 1.0 / n as f64));
    let context = tape.matmul(alpha, slots.feats)?;
    let h = tape.constant(Tensor::zeros(&[1, hidden]));
    let c = tape.constant(Tensor::zeros(&[1, hidden]));
    Ok(StateVars {
        h,
        c,
        context,
        alpha,
        prev_token: super::START,
    })
}

pub(crate) fn embed(tape: &mut Tape, bound: &Bound, token: usize) -> Result<Var, DecoderError> {
    if token >= bound.dims.vocab {
        return Err(DecoderError::Token {
            token,
            vocab: bound.dims.vocab,
        });
    }
    Ok(tape.select_row(bound.var("embedding"), token)?)
}

/// `w_hᵀ tanh(W_a [F_i ; h ; e])` for every slot `i`, as a `1 × (2n+1)` row.
pub(crate) fn scores_on_tape(
    tape: &mut Tape,
    bound: &Bound,
    slots: SlotVars,
    h: Var,
    e: Var,
) -> Result<Var, DecoderError> {
    let h_rep = tape.matmul(slots.ones, h)?;
    let e_rep = tape.matmul(slots.ones, e)?;
    let joined = tape.concat_cols(&[slots.feats, h_rep, e_rep])?;
    let pre = tape.matmul(joined, bound.var("attn_w"))?;
    let act = tape.tanh(pre);
    let col = tape.matmul(act, bound.var("attn_v"))?;
    let n = tape.value(col).rows();
    Ok(tape.reshape(col, &[1, n])?)
}

/// One LSTM cell update; returns the new `(h, c)`.
pub(crate) fn lstm_on_tape(
    tape: &mut Tape,
    bound: &Bound,
    input: Var,
    h: Var,
    c: Var,
) -> Result<(Var, Var), DecoderError> {
    let hidden = bound.dims.hidden;
    let xw = tape.matmul(input, bound.var("lstm_wx"))?;
    let hw = tape.matmul(h, bound.var("lstm_wh"))?;
    let sum = tape.add(xw, hw)?;
    let gates = tape.add_bias(sum, bound.var("lstm_b"))?;
    let pre_i = tape.slice_cols(gates, 0, hidden)?;
    let pre_f = tape.slice_cols(gates, hidden, hidden)?;
    let pre_g = tape.slice_cols(gates, 2 * hidden, hidden)?;
    let pre_o = tape.slice_cols(gates, 3 * hidden, hidden)?;
    let i = tape.sigmoid(pre_i);
    let f = tape.sigmoid(pre_f);
    let g = tape.tanh(pre_g);
    let o = tape.sigmoid(pre_o);
    let keep = tape.mul(f, c)?;
    let write = tape.mul(i, g)?;
    let c_next = tape.add(keep, write)?;
    let c_act = tape.tanh(c_next);
    let h_next = tape.mul(o, c_act)?;
    Ok((h_next, c_next))
}

/// Pre-softmax word scores `U_p tanh(W_p [C_t ; h] + b_p)`.
pub(crate) fn logits_on_tape(tape: &mut Tape, bound: &Bound, context: Var, h: Var) -> Result<Var, DecoderError> {
    let joined = tape.concat_cols(&[context, h])?;
    let pre = tape.matmul(joined, bound.var("out_w"))?;
    let biased = tape.add_bias(pre, bound.var("out_b"))?;
    let act = tape.tanh(biased);
    Ok(tape.matmul(act, bound.var("out_u"))?)
}

pub(crate) fn lstm_input_on_tape(
    tape: &mut Tape,
    mode: LstmInput,
    context: Var,
    e: Var,
) -> Result<Var, DecoderError> {
    Ok(match mode {
        LstmInput::ContextOnly => context,
        LstmInput::ContextPlusEmbedding => tape.concat_cols(&[context, e])?,
    })
}

/// One decoding step.
///
/// The incoming state holds `h_{t-2}`, `c_{t-2}`, `C_{t-1}` and the previous
/// word. The cell first advances to `h_{t-1} = LSTM(C_{t-1}, h_{t-2})`, then
/// scores every slot against `h_{t-1}` and `e_{t-1}`, forms `α_t` and `C_t`,
/// and predicts the word from `[C_t ; h_{t-1}]`. Returns the logits and the
/// state for the next step (its `prev_token` is left for the caller to set).
pub(crate) fn step_on_tape(
    tape: &mut Tape,
    bound: &Bound,
    slots: SlotVars,
    state: &StateVars,
) -> Result<(Var, StateVars), DecoderError> {
    let e = embed(tape, bound, state.prev_token)?;
    let input = lstm_input_on_tape(tape, bound.dims.lstm_input, state.context, e)?;
    let (h, c) = lstm_on_tape(tape, bound, input, state.h, state.c)?;
    let scores = scores_on_tape(tape, bound, slots, h, e)?;
    let alpha = tape.softmax(scores)?;
    let context = tape.matmul(alpha, slots.feats)?;
    let logits = logits_on_tape(tape, bound, context, h)?;
    Ok((
        logits,
        StateVars {
            h,
            c,
            context,
            alpha,
            prev_token: state.prev_token,
        },
    ))
}
