//! Central finite-difference verification of tape gradients.
//!
//! The numeric side only ever evaluates forward passes, so it shares no code
//! with the backward rules it checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Tape, Tensor, TensorError, Var};

pub const FD_EPSILON: f64 = 1e-5;
pub const REL_TOLERANCE: f64 = 1e-4;
/// Denominator floor for the relative error. Below this magnitude the
/// difference is effectively compared in absolute terms.
pub const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Central differences of a scalar function over every element of every input.
pub fn numeric_gradients(
    inputs: &[Tensor],
    eps: f64,
    mut f: impl FnMut(&[Tensor]) -> f64,
) -> Vec<Tensor> {
    let mut work = inputs.to_vec();
    let mut out = Vec::with_capacity(inputs.len());
    for t in 0..inputs.len() {
        let mut g = vec![0.0; inputs[t].len()];
        for (i, gi) in g.iter_mut().enumerate() {
            let orig = work[t].data()[i];
            work[t].data_mut()[i] = orig + eps;
            let plus = f(&work);
            work[t].data_mut()[i] = orig - eps;
            let minus = f(&work);
            work[t].data_mut()[i] = orig;
            *gi = (plus - minus) / (2.0 * eps);
        }
        out.push(Tensor::new(inputs[t].shape().to_vec(), g).expect("same shape"));
    }
    out
}

/// Runs `build` once with gradients and once per perturbation without, and
/// returns the largest relative error over all input elements.
pub fn max_relative_error<F>(inputs: &[Tensor], build: F) -> Result<f64, TensorError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, TensorError>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let loss = build(&mut tape, &vars)?;
    tape.backward(loss)?;
    let analytic: Vec<Tensor> = vars
        .iter()
        .map(|&v| tape.grad(v).expect("params track gradients"))
        .collect();

    let mut failure = None;
    let numeric = numeric_gradients(inputs, FD_EPSILON, |xs| {
        let mut t = Tape::new();
        let vs: Vec<Var> = xs.iter().map(|x| t.constant(x.clone())).collect();
        match build(&mut t, &vs) {
            Ok(l) => t.value(l).item(),
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
        .flat_map(|(a, n)| a.data().iter().zip(n.data()).map(|(x, y)| relative_error(*x, *y)))
        .fold(0.0, f64::max))
}

/// Outcome of one named gradient check over several seeded trials.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub trials: usize,
    pub max_rel_error: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.max_rel_error.is_finite() && self.max_rel_error < REL_TOLERANCE
    }
}

type Builder = fn(&mut Tape, &[Var]) -> Result<Var, TensorError>;

struct OpCase {
    name: &'static str,
    inputs: fn(&mut ChaCha8Rng) -> Vec<Tensor>,
    build: Builder,
}

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
    Tensor::new(shape.to_vec(), data).expect("positive extents")
}

fn dim(rng: &mut ChaCha8Rng) -> usize {
    rng.gen_range(1..=4)
}

/// Reduces `out` to a scalar through fixed random weights so every output
/// element carries a distinct adjoint.
fn weighted_sum(tape: &mut Tape, out: Var, weights: Var) -> Result<Var, TensorError> {
    let w = tape.reshape(weights, tape.value(out).shape().to_vec().as_slice())?;
    let prod = tape.mul(out, w)?;
    Ok(tape.sum(prod))
}

fn weights_for(rng: &mut ChaCha8Rng, len: usize) -> Tensor {
    rand_tensor(rng, &[len], 1.0)
}

fn op_cases() -> Vec<OpCase> {
    vec![
        OpCase {
            name: "matmul",
            inputs: |rng| {
                let (m, k, p) = (dim(rng), dim(rng), dim(rng));
                let w = weights_for(rng, m * p);
                vec![rand_tensor(rng, &[m, k], 1.0), rand_tensor(rng, &[k, p], 1.0), w]
            },
            build: |t, v| {
                let out = t.matmul(v[0], v[1])?;
                weighted_sum(t, out, v[2])
            },
        },
        OpCase {
            name: "add",
            inputs: |rng| {
                let (m, n) = (dim(rng), dim(rng));
                let w = weights_for(rng, m * n);
                vec![rand_tensor(rng, &[m, n], 1.0), rand_tensor(rng, &[m, n], 1.0), w]
            },
            build: |t, v| {
                let out = t.add(v[0], v[1])?;
                weighted_sum(t, out, v[2])
            },
        },
        OpCase {
            name: "add_bias",
            inputs: |rng| {
                let (m, n) = (dim(rng), dim(rng));
                let w = weights_for(rng, m * n);
                vec![rand_tensor(rng, &[m, n], 1.0), rand_tensor(rng, &[n], 1.0), w]
            },
            build: |t, v| {
                let out = t.add_bias(v[0], v[1])?;
                weighted_sum(t, out, v[2])
            },
        },
        OpCase {
            name: "mul",
            inputs: |rng| {
                let (m, n) = (dim(rng), dim(rng));
                let w = weights_for(rng, m * n);
                vec![rand_tensor(rng, &[m, n], 1.0), rand_tensor(rng, &[m, n], 1.0), w]
            },
            build: |t, v| {
                let out = t.mul(v[0], v[1])?;
                weighted_sum(t, out, v[2])
            },
        },
        OpCase {
            name: "scale",
            inputs: |rng| {
                let n = dim(rng) * dim(rng);
                let w = weights_for(rng, n);
                vec![rand_tensor(rng, &[n], 1.0), w]
            },
            build: |t, v| {
                let out = t.scale(v[0], -1.7);
                weighted_sum(t, out, v[1])
            },
        },
        OpCase {
            name: "tanh",
            inputs: |rng| {
                let (m, n) = (dim(rng), dim(rng));
                let w = weights_for(rng, m * n);
                vec![rand_tensor(rng, &[m, n], 2.0), w]
            },
            build: |t, v| {
                let out = t.tanh(v[0]);
                weighted_sum(t, out, v[1])
            },
        },
        OpCase {
            name: "sigmoid",
            inputs: |rng| {
                let (m, n) = (dim(rng), dim(rng));
                let w = weights_for(rng, m * n);
                vec![rand_tensor(rng, &[m, n], 3.0), w]
            },
            build: |t, v| {
                let out = t.sigmoid(v[0]);
                weighted_sum(t, out, v[1])
            },
        },
        OpCase {
            name: "softmax",
            inputs: |rng| {
                let (m, n) = (dim(rng), dim(rng) + 1);
                let w = weights_for(rng, m * n);
                vec![rand_tensor(rng, &[m, n], 3.0), w]
            },
            build: |t, v| {
                let out = t.softmax(v[0])?;
                weighted_sum(t, out, v[1])
            },
        },
        OpCase {
            name: "concat_rows",
            inputs: |rng| {
                let n = dim(rng);
                let (r1, r2) = (dim(rng), dim(rng));
                let w = weights_for(rng, (r1 + r2) * n);
                vec![rand_tensor(rng, &[r1, n], 1.0), rand_tensor(rng, &[r2, n], 1.0), w]
            },
            build: |t, v| {
                let out = t.concat_rows(&[v[0], v[1]])?;
                weighted_sum(t, out, v[2])
            },
        },
        OpCase {
            name: "concat_cols",
            inputs: |rng| {
                let m = dim(rng);
                let (c1, c2, c3) = (dim(rng), dim(rng), dim(rng));
                let w = weights_for(rng, m * (c1 + c2 + c3));
                vec![
                    rand_tensor(rng, &[m, c1], 1.0),
                    rand_tensor(rng, &[m, c2], 1.0),
                    rand_tensor(rng, &[m, c3], 1.0),
                    w,
                ]
            },
            build: |t, v| {
                let out = t.concat_cols(&[v[0], v[1], v[2]])?;
                weighted_sum(t, out, v[3])
            },
        },
        OpCase {
            name: "slice_cols",
            inputs: |rng| {
                let (m, n) = (dim(rng), dim(rng) + 3);
                let w = weights_for(rng, m * 2);
                vec![rand_tensor(rng, &[m, n], 1.0), w]
            },
            build: |t, v| {
                let cols = t.value(v[0]).cols();
                let out = t.slice_cols(v[0], cols - 3, 2)?;
                weighted_sum(t, out, v[1])
            },
        },
        OpCase {
            name: "select_row",
            inputs: |rng| {
                let (m, n) = (dim(rng) + 1, dim(rng));
                let w = weights_for(rng, n);
                vec![rand_tensor(rng, &[m, n], 1.0), w]
            },
            build: |t, v| {
                let rows = t.value(v[0]).rows();
                let out = t.select_row(v[0], rows - 1)?;
                weighted_sum(t, out, v[1])
            },
        },
        OpCase {
            name: "reshape",
            inputs: |rng| {
                let (m, n) = (dim(rng), dim(rng));
                let w = weights_for(rng, m * n);
                vec![rand_tensor(rng, &[m, n], 1.0), w]
            },
            build: |t, v| {
                let len = t.value(v[0]).len();
                let out = t.reshape(v[0], &[1, len])?;
                weighted_sum(t, out, v[1])
            },
        },
        OpCase {
            name: "sum",
            inputs: |rng| {
                let (m, n) = (dim(rng), dim(rng));
                vec![rand_tensor(rng, &[m, n], 1.0)]
            },
            build: |t, v| {
                let sq = t.mul(v[0], v[0])?;
                Ok(t.sum(sq))
            },
        },
        OpCase {
            name: "cross_entropy",
            inputs: |rng| {
                let n = dim(rng) + 1;
                vec![rand_tensor(rng, &[1, n], 3.0)]
            },
            build: |t, v| {
                let n = t.value(v[0]).len();
                t.cross_entropy(v[0], n / 2)
            },
        },
        OpCase {
            // Shared subexpression: `h` feeds two branches that meet again.
            name: "diamond",
            inputs: |rng| {
                let (m, n) = (dim(rng), dim(rng));
                vec![rand_tensor(rng, &[m, n], 1.0), rand_tensor(rng, &[n, n], 1.0)]
            },
            build: |t, v| {
                let h = t.matmul(v[0], v[1])?;
                let a = t.tanh(h);
                let b = t.sigmoid(h);
                let j = t.mul(a, b)?;
                let k = t.add(j, h)?;
                Ok(t.sum(k))
            },
        },
    ]
}

/// Every tape op against finite differences, `trials` seeded inputs each.
pub fn check_ops(trials: usize, seed: u64) -> Result<Vec<CheckOutcome>, TensorError> {
    op_cases()
        .iter()
        .enumerate()
        .map(|(ci, case)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((ci as u64) << 32));
            let mut worst: f64 = 0.0;
            for _ in 0..trials {
                let inputs = (case.inputs)(&mut rng);
                worst = worst.max(max_relative_error(&inputs, case.build)?);
            }
            Ok(CheckOutcome {
                name: case.name.to_string(),
                trials,
                max_rel_error: worst,
            })
        })
        .collect()
}

/// `tanh` registered with `cos` as its derivative. Used to prove the checker
/// reports a broken backward rule.
pub fn check_faulty_op(trials: usize, seed: u64) -> Result<CheckOutcome, TensorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let inputs = vec![rand_tensor(&mut rng, &[3], 1.0)];
        worst = worst.max(max_relative_error(&inputs, |t, v| {
            let y = t.map(v[0], f64::tanh, f64::cos);
            Ok(t.sum(y))
        })?);
    }
    Ok(CheckOutcome {
        name: "faulty_tanh".to_string(),
        trials,
        max_rel_error: worst,
    })
}
