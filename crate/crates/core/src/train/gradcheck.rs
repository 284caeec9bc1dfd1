//! Finite-difference check of the full unrolled decoder loss.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autograd::gradcheck::{numeric_gradients, relative_error, CheckOutcome, FD_EPSILON};
use crate::autograd::Tensor;
use crate::decoder::{DecoderDims, DecoderParams, Features, LstmInput, END, START};
use crate::features::{RawFeatures, RAW_DIM};

use super::{loss_and_gradients, teacher_forced_loss, TrainError};

/// Width shared by `d`, `H`, `A` and `P` in the check.
pub const CHECK_WIDTH: usize = 4;
pub const CHECK_VOCAB: usize = 6;
pub const CHECK_OBJECTS: usize = 2;
/// Decoding steps: two words plus `<end>`.
pub const CHECK_STEPS: usize = 3;

fn random_raw(rng: &mut ChaCha8Rng) -> RawFeatures {
    let mut row = || {
        let mut r = [0.0; RAW_DIM];
        r.iter_mut().for_each(|x| *x = rng.gen_range(0.0..1.0));
        r
    };
    RawFeatures {
        objects: (0..CHECK_OBJECTS).map(|_| row()).collect(),
        patches: (0..CHECK_OBJECTS).map(|_| row()).collect(),
        global: row(),
    }
}

/// Largest relative error between backpropagated and central-difference
/// gradients of the loss, over every scalar of every parameter array.
pub fn decoder_loss_error(params: &DecoderParams, raw: &RawFeatures, caption: &[usize]) -> Result<f64, TrainError> {
    let (_, analytic) = loss_and_gradients(params, Features::Raw(raw), caption)?;
    let mut failure = None;
    let numeric = numeric_gradients(params.arrays(), FD_EPSILON, |arrays| {
        let dims = params.dims();
        let p = DecoderParams::from_named(dims, |n| {
            DecoderParams::NAMES
                .iter()
                .position(|x| *x == n)
                .map(|i| arrays[i].clone())
        })
        .expect("same shapes");
        match teacher_forced_loss(&p, Features::Raw(raw), caption) {
            Ok(v) => v,
            Err(e) => {
                failure = Some(e);
                f64::NAN
            }
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(analytic
        .iter()
        .zip(&numeric)
        .flat_map(|(a, n): (&Tensor, &Tensor)| a.data().iter().zip(n.data()).map(|(x, y)| relative_error(*x, *y)))
        .fold(0.0, f64::max))
}

/// `trials` seeded decoders of width 4 over a 6-word vocabulary with two
/// objects and a three-step caption, once per LSTM input mode.
pub fn check_decoder(trials: usize, seed: u64) -> Result<Vec<CheckOutcome>, TrainError> {
    [LstmInput::ContextPlusEmbedding, LstmInput::ContextOnly]
        .iter()
        .enumerate()
        .map(|(mi, &mode)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((mi as u64 + 1) << 40));
            let dims = DecoderDims {
                feature: CHECK_WIDTH,
                hidden: CHECK_WIDTH,
                attention: CHECK_WIDTH,
                output: CHECK_WIDTH,
                vocab: CHECK_VOCAB,
                lstm_input: mode,
            };
            let mut worst: f64 = 0.0;
            for _ in 0..trials {
                let params = DecoderParams::init(dims, &mut rng);
                let raw = random_raw(&mut rng);
                let mut caption = vec![START];
                caption.extend((1..CHECK_STEPS).map(|_| rng.gen_range(4..CHECK_VOCAB)));
                caption.push(END);
                worst = worst.max(decoder_loss_error(&params, &raw, &caption)?);
            }
            Ok(CheckOutcome {
                name: format!("decoder_loss[{}]", mode.as_str()),
                trials,
                max_rel_error: worst,
            })
        })
        .collect()
}
