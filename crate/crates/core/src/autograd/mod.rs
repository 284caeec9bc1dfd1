//! Minimal reverse-mode automatic differentiation over dense `f64` arrays.
//!
//! A [`Tape`] is built fresh for every forward pass. Values are recorded in
//! evaluation order and [`Tape::backward`] walks them once in reverse.
//!
//! ```
//! use cha::autograd::{Tape, Tensor};
//!
//! let mut tape = Tape::new();
//! let x = tape.param(Tensor::vector(&[1.0, -2.0, 3.0]));
//! let sq = tape.mul(x, x).unwrap();
//! let loss = tape.sum(sq);
//! tape.backward(loss).unwrap();
//! assert_eq!(tape.grad(x).unwrap().data(), &[2.0, -4.0, 6.0]);
//! ```

pub mod gradcheck;
mod tape;
mod tensor;

pub use tape::{cross_entropy_from_probs, log_softmax, sigmoid, softmax, Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("shape {shape:?} does not describe {len} elements")]
    BadShape { shape: Vec<usize>, len: usize },
    #[error("{0} needs at least one element")]
    Empty(&'static str),
    #[error("index {index} out of range for extent {len}")]
    Index { index: usize, len: usize },
    #[error("backward needs a scalar loss, got shape {0:?}")]
    NonScalar(Vec<usize>),
}
