use super::tensor::{matmul_a_bt_into, matmul_at_b_into};
use super::{Tensor, TensorError};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    Add(usize, usize),
    AddBias(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Tanh(usize),
    Sigmoid(usize),
    Map(usize, fn(f64) -> f64),
    Softmax(usize),
    ConcatRows(Vec<usize>),
    ConcatCols(Vec<usize>),
    SliceCols { src: usize, start: usize },
    SelectRow { src: usize, row: usize },
    Reshape(usize),
    Sum(usize),
    CrossEntropy { logits: usize, target: usize, probs: Vec<f64> },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    /// Persistent accumulator; only leaves that require a gradient carry one.
    grad: Option<Vec<f64>>,
}

/// Define-by-run recording of tensor operations.
///
/// Nodes are appended in evaluation order, so the node list is already a
/// topological order and [`Tape::backward`] is a single reverse sweep.
/// Gradients accumulate into leaves across repeated `backward` calls until
/// [`Tape::zero_grads`] resets them.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of recorded nodes, leaves included.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        let grad = requires_grad.then(|| vec![0.0; value.len()]);
        self.push_node(Node {
            value,
            op: Op::Leaf,
            requires_grad,
            grad,
        })
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Accumulated gradient of a leaf, if it tracks one.
    pub fn grad(&self, v: Var) -> Option<Tensor> {
        let node = &self.nodes[v.0];
        node.grad
            .as_ref()
            .map(|g| Tensor::new(node.value.shape().to_vec(), g.clone()).expect("grad shape"))
    }

    pub fn zero_grads(&mut self) {
        for node in &mut self.nodes {
            if let Some(g) = node.grad.as_mut() {
                g.iter_mut().for_each(|x| *x = 0.0);
            }
        }
    }

    /// Drops every node recorded after the first `len`.
    pub fn truncate(&mut self, len: usize) {
        self.nodes.truncate(len);
    }

    fn push_node(&mut self, node: Node) -> Var {
        self.nodes.push(node);
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[usize]) -> Var {
        let requires_grad = inputs.iter().any(|&i| self.nodes[i].requires_grad);
        self.push_node(Node {
            value,
            op,
            requires_grad,
            grad: None,
        })
    }

    fn shape_err(&self, op: &'static str, a: Var, b: Var) -> TensorError {
        TensorError::Shape {
            op,
            left: self.value(a).shape().to_vec(),
            right: self.value(b).shape().to_vec(),
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let value = self.value(a).matmul(self.value(b))?;
        Ok(self.push(value, Op::MatMul(a.0, b.0), &[a.0, b.0]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(self.shape_err("add", a, b));
        }
        let data = x.data().iter().zip(y.data()).map(|(p, q)| p + q).collect();
        let value = Tensor::new(x.shape().to_vec(), data)?;
        Ok(self.push(value, Op::Add(a.0, b.0), &[a.0, b.0]))
    }

    /// `x (m×n) + bias (n)` with the bias repeated over every row.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var, TensorError> {
        let (xv, bv) = (self.value(x), self.value(bias));
        if bv.len() != xv.cols() || bv.rows() != 1 {
            return Err(self.shape_err("add_bias", x, bias));
        }
        let n = xv.cols();
        let data = xv
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| v + bv.data()[i % n])
            .collect();
        let value = Tensor::new(xv.shape().to_vec(), data)?;
        Ok(self.push(value, Op::AddBias(x.0, bias.0), &[x.0, bias.0]))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(self.shape_err("mul", a, b));
        }
        let data = x.data().iter().zip(y.data()).map(|(p, q)| p * q).collect();
        let value = Tensor::new(x.shape().to_vec(), data)?;
        Ok(self.push(value, Op::Mul(a.0, b.0), &[a.0, b.0]))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.value(a).map(|x| x * factor);
        self.push(value, Op::Scale(a.0, factor), &[a.0])
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        self.push(value, Op::Tanh(a.0), &[a.0])
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        self.push(value, Op::Sigmoid(a.0), &[a.0])
    }

    /// Elementwise custom activation: `f` for the forward value and
    /// `df(x)` for its derivative at the input `x`.
    pub fn map(&mut self, a: Var, f: fn(f64) -> f64, df: fn(f64) -> f64) -> Var {
        let value = self.value(a).map(f);
        self.push(value, Op::Map(a.0, df), &[a.0])
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax(&mut self, a: Var) -> Result<Var, TensorError> {
        let x = self.value(a);
        let cols = x.cols();
        let mut data = Vec::with_capacity(x.len());
        for row in x.data().chunks(cols) {
            data.extend(softmax(row)?);
        }
        let value = Tensor::new(x.shape().to_vec(), data)?;
        Ok(self.push(value, Op::Softmax(a.0), &[a.0]))
    }

    /// Stacks parts along the leading axis. Rank-1 parts join end to end;
    /// otherwise every part must share the trailing extent.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let first = *parts.first().ok_or(TensorError::Empty("concat_rows"))?;
        let all_vectors = parts.iter().all(|&p| self.value(p).rank() == 1);
        let cols = self.value(first).cols();
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let v = self.value(p);
            if !all_vectors && v.cols() != cols {
                return Err(self.shape_err("concat_rows", first, p));
            }
            rows += v.rows();
            data.extend_from_slice(v.data());
        }
        let shape = if all_vectors {
            vec![data.len()]
        } else {
            vec![rows, cols]
        };
        let value = Tensor::new(shape, data)?;
        let ids: Vec<usize> = parts.iter().map(|p| p.0).collect();
        Ok(self.push(value, Op::ConcatRows(ids.clone()), &ids))
    }

    /// Joins parts side by side; every part must have the same row count.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let first = *parts.first().ok_or(TensorError::Empty("concat_cols"))?;
        let rows = self.value(first).rows();
        if let Some(&bad) = parts.iter().find(|&&p| self.value(p).rows() != rows) {
            return Err(self.shape_err("concat_cols", first, bad));
        }
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        let value = Tensor::new(vec![rows, total], data)?;
        let ids: Vec<usize> = parts.iter().map(|p| p.0).collect();
        Ok(self.push(value, Op::ConcatCols(ids.clone()), &ids))
    }

    /// Columns `start..start+len` of every row.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var, TensorError> {
        let x = self.value(a);
        let cols = x.cols();
        if len == 0 || start + len > cols {
            return Err(TensorError::Index {
                index: start + len,
                len: cols,
            });
        }
        let rows = x.rows();
        let mut data = Vec::with_capacity(rows * len);
        for r in 0..rows {
            data.extend_from_slice(&x.row_slice(r)[start..start + len]);
        }
        let value = Tensor::new(vec![rows, len], data)?;
        Ok(self.push(value, Op::SliceCols { src: a.0, start }, &[a.0]))
    }

    /// Row `row` as a `1 × cols` tensor (embedding lookup).
    pub fn select_row(&mut self, a: Var, row: usize) -> Result<Var, TensorError> {
        let x = self.value(a);
        if row >= x.rows() {
            return Err(TensorError::Index {
                index: row,
                len: x.rows(),
            });
        }
        let value = Tensor::row(x.row_slice(row));
        Ok(self.push(value, Op::SelectRow { src: a.0, row }, &[a.0]))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var, TensorError> {
        let value = self.value(a).reshaped(shape)?;
        Ok(self.push(value, Op::Reshape(a.0), &[a.0]))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).data().iter().sum());
        self.push(value, Op::Sum(a.0), &[a.0])
    }

    /// `−log softmax(logits)[target]` for a single row of logits.
    pub fn cross_entropy(&mut self, logits: Var, target: usize) -> Result<Var, TensorError> {
        let x = self.value(logits);
        if x.rows() != 1 {
            return Err(TensorError::Shape {
                op: "cross_entropy",
                left: x.shape().to_vec(),
                right: vec![1, x.cols()],
            });
        }
        if target >= x.len() {
            return Err(TensorError::Index {
                index: target,
                len: x.len(),
            });
        }
        let lsm = log_softmax(x.data())?;
        let loss = -lsm[target];
        let probs = lsm.iter().map(|l| l.exp()).collect();
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits: logits.0,
                target,
                probs,
            },
            &[logits.0],
        ))
    }

    /// Reverse sweep from a scalar `loss`, adding `∂loss/∂leaf` into every
    /// leaf that requires a gradient.
    pub fn backward(&mut self, loss: Var) -> Result<(), TensorError> {
        let loss_value = &self.nodes[loss.0].value;
        if loss_value.len() != 1 {
            return Err(TensorError::NonScalar(loss_value.shape().to_vec()));
        }
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        let mut deferred: Vec<Vec<(usize, Vec<f64>)>> = vec![Vec::new(); loss.0 + 1];
        adj[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            if let Op::Leaf = self.nodes[idx].op {
                let uses = std::mem::take(&mut deferred[idx]);
                if adj[idx].is_none() && uses.is_empty() {
                    continue;
                }
                let mut acc = self.nodes[idx].grad.take().expect("trainable leaves carry a gradient");
                if let Some(g) = adj[idx].take() {
                    add_into(&mut acc, &g);
                }
                accumulate_weight_grad(&mut acc, self.nodes[idx].value.cols(), &uses, &self.nodes);
                self.nodes[idx].grad = Some(acc);
                continue;
            }
            let Some(g) = adj[idx].take() else { continue };
            self.propagate(idx, &g, &mut adj, &mut deferred);
        }
        Ok(())
    }

    fn propagate(
        &self,
        idx: usize,
        g: &[f64],
        adj: &mut [Option<Vec<f64>>],
        deferred: &mut [Vec<(usize, Vec<f64>)>],
    ) {
        let nodes = &self.nodes;
        let node = &nodes[idx];
        let out = node.value.data();
        // Adjoint buffer for input `i`, allocated on first use. Inputs that
        // do not require a gradient are skipped entirely.
        let mut with = |i: usize, f: &mut dyn FnMut(&mut [f64])| {
            if !nodes[i].requires_grad {
                return;
            }
            let buf = adj[i].get_or_insert_with(|| vec![0.0; nodes[i].value.len()]);
            f(buf);
        };
        match &node.op {
            Op::Leaf => unreachable!("leaves are handled by backward"),
            Op::MatMul(a, b) => {
                let (av, bv) = (&nodes[*a].value, &nodes[*b].value);
                let (m, k, p) = (av.rows(), av.cols(), bv.cols());
                with(*a, &mut |buf| matmul_a_bt_into(g, bv.data(), buf, m, k, p));
                if matches!(nodes[*b].op, Op::Leaf) && nodes[*b].requires_grad {
                    // A weight reused across time steps receives one outer
                    // product per use; they are summed in a single pass over
                    // the weight once the sweep reaches it.
                    deferred[*b].push((*a, g.to_vec()));
                } else {
                    with(*b, &mut |buf| matmul_at_b_into(av.data(), g, buf, m, k, p));
                }
            }
            Op::Add(a, b) => {
                for i in [*a, *b] {
                    with(i, &mut |buf| add_into(buf, g));
                }
            }
            Op::AddBias(x, b) => {
                let n = nodes[*b].value.len();
                with(*x, &mut |buf| add_into(buf, g));
                with(*b, &mut |buf| {
                    for row in g.chunks(n) {
                        add_into(buf, row);
                    }
                });
            }
            Op::Mul(a, b) => {
                let (av, bv) = (nodes[*a].value.data(), nodes[*b].value.data());
                with(*a, &mut |buf| {
                    for ((o, gi), y) in buf.iter_mut().zip(g).zip(bv) {
                        *o += gi * y;
                    }
                });
                with(*b, &mut |buf| {
                    for ((o, gi), x) in buf.iter_mut().zip(g).zip(av) {
                        *o += gi * x;
                    }
                });
            }
            Op::Scale(a, s) => with(*a, &mut |buf| {
                for (o, gi) in buf.iter_mut().zip(g) {
                    *o += s * gi;
                }
            }),
            Op::Tanh(a) => with(*a, &mut |buf| {
                for ((o, gi), y) in buf.iter_mut().zip(g).zip(out) {
                    *o += gi * (1.0 - y * y);
                }
            }),
            Op::Sigmoid(a) => with(*a, &mut |buf| {
                for ((o, gi), y) in buf.iter_mut().zip(g).zip(out) {
                    *o += gi * y * (1.0 - y);
                }
            }),
            Op::Map(a, df) => {
                let x = nodes[*a].value.data();
                with(*a, &mut |buf| {
                    for ((o, gi), xi) in buf.iter_mut().zip(g).zip(x) {
                        *o += gi * df(*xi);
                    }
                });
            }
            Op::Softmax(a) => {
                let cols = node.value.cols();
                with(*a, &mut |buf| {
                    for ((o_row, g_row), y_row) in
                        buf.chunks_mut(cols).zip(g.chunks(cols)).zip(out.chunks(cols))
                    {
                        let dot: f64 = g_row.iter().zip(y_row).map(|(x, y)| x * y).sum();
                        for ((o, gi), yi) in o_row.iter_mut().zip(g_row).zip(y_row) {
                            *o += yi * (gi - dot);
                        }
                    }
                });
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let n = nodes[p].value.len();
                    with(p, &mut |buf| add_into(buf, &g[offset..offset + n]));
                    offset += n;
                }
            }
            Op::ConcatCols(parts) => {
                let total = node.value.cols();
                let mut offset = 0;
                for &p in parts {
                    let c = nodes[p].value.cols();
                    with(p, &mut |buf| {
                        for (o_row, g_row) in buf.chunks_mut(c).zip(g.chunks(total)) {
                            add_into(o_row, &g_row[offset..offset + c]);
                        }
                    });
                    offset += c;
                }
            }
            Op::SliceCols { src, start } => {
                let src_cols = nodes[*src].value.cols();
                let len = node.value.cols();
                with(*src, &mut |buf| {
                    for (o_row, g_row) in buf.chunks_mut(src_cols).zip(g.chunks(len)) {
                        add_into(&mut o_row[*start..*start + len], g_row);
                    }
                });
            }
            Op::SelectRow { src, row } => {
                let cols = node.value.cols();
                with(*src, &mut |buf| add_into(&mut buf[row * cols..(row + 1) * cols], g));
            }
            Op::Reshape(a) => with(*a, &mut |buf| add_into(buf, g)),
            Op::Sum(a) => with(*a, &mut |buf| buf.iter_mut().for_each(|o| *o += g[0])),
            Op::CrossEntropy {
                logits,
                target,
                probs,
            } => with(*logits, &mut |buf| {
                for (j, (o, p)) in buf.iter_mut().zip(probs).enumerate() {
                    let onehot = if j == *target { 1.0 } else { 0.0 };
                    *o += g[0] * (p - onehot);
                }
            }),
        }
    }
}

/// `acc += Σ aᵀ·g` over the deferred `(a, g)` uses of a `k × p` weight,
/// visiting each row of `acc` once.
fn accumulate_weight_grad(acc: &mut [f64], p: usize, uses: &[(usize, Vec<f64>)], nodes: &[Node]) {
    if uses.is_empty() {
        return;
    }
    for (kk, row) in acc.chunks_mut(p).enumerate() {
        for (a, g) in uses {
            let av = &nodes[*a].value;
            let k = av.cols();
            for (i, g_row) in g.chunks(p).enumerate() {
                let coef = av.data()[i * k + kk];
                if coef != 0.0 {
                    for (o, gi) in row.iter_mut().zip(g_row) {
                        *o += coef * gi;
                    }
                }
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax of a slice.
pub fn softmax(v: &[f64]) -> Result<Vec<f64>, TensorError> {
    if v.is_empty() {
        return Err(TensorError::Empty("softmax"));
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / z).collect())
}

pub fn log_softmax(v: &[f64]) -> Result<Vec<f64>, TensorError> {
    if v.is_empty() {
        return Err(TensorError::Empty("log_softmax"));
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    Ok(v.iter().map(|x| x - lse).collect())
}

/// `−ln p[target]` for an explicit probability vector.
pub fn cross_entropy_from_probs(p: &[f64], target: usize) -> Result<f64, TensorError> {
    let prob = p.get(target).ok_or(TensorError::Index {
        index: target,
        len: p.len(),
    })?;
    Ok(-prob.ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn matmul_examples() {
        let mut t = Tape::new();
        let eye = t.constant(Tensor::matrix(2, 2, vec![1., 0., 0., 1.]).unwrap());
        let m = t.constant(Tensor::matrix(2, 2, vec![1., 2., 3., 4.]).unwrap());
        let r = t.matmul(eye, m).unwrap();
        assert_eq!(t.value(r).data(), &[1., 2., 3., 4.]);

        let a = t.constant(Tensor::matrix(1, 1, vec![2.]).unwrap());
        let b = t.constant(Tensor::matrix(1, 1, vec![3.]).unwrap());
        let r = t.matmul(a, b).unwrap();
        assert_eq!(t.value(r).data(), &[6.]);

        let n = t.constant(Tensor::matrix(2, 2, vec![5., 6., 7., 8.]).unwrap());
        let r = t.matmul(m, n).unwrap();
        assert_eq!(t.value(r).data(), &[19., 22., 43., 50.]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::zeros(&[2, 3]));
        let b = t.constant(Tensor::zeros(&[2, 3]));
        let err = t.matmul(a, b).unwrap_err();
        assert_eq!(
            err,
            TensorError::Shape {
                op: "matmul",
                left: vec![2, 3],
                right: vec![2, 3]
            }
        );
        assert!(err.to_string().contains("[2, 3] vs [2, 3]"));
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        for c in [-1e4, -3.0, 0.0, 17.5, 1e4] {
            assert_eq!(softmax(&[c; 4]).unwrap(), vec![0.25; 4]);
        }
        // e¹, e², e³ normalized by hand.
        assert!(close(
            &softmax(&[1.0, 2.0, 3.0]).unwrap(),
            &[0.09003, 0.24473, 0.66524],
            1e-5
        ));
        assert_eq!(softmax(&[]), Err(TensorError::Empty("softmax")));
    }

    #[test]
    fn softmax_extreme_entries_stay_on_simplex() {
        let p = softmax(&[1e4, -1e4, 0.0, 1e4 - 1.0]).unwrap();
        assert!(p.iter().all(|&x| x >= 0.0 && x.is_finite()));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tanh_examples() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::vector(&[0.0, 20.0, 1.0]));
        let y = t.tanh(x);
        let v = t.value(y).data();
        assert_eq!(v[0], 0.0);
        assert!((v[1] - 1.0).abs() < 1e-9);
        assert!((v[2] - 0.761594).abs() < 1e-6);
    }

    #[test]
    fn concat_rows_examples() {
        let mut t = Tape::new();
        let a = t.param(Tensor::vector(&[1., 2.]));
        let single = t.concat_rows(&[a]).unwrap();
        assert_eq!(t.value(single), t.value(a));

        let b = t.param(Tensor::vector(&[3., 4., 5.]));
        let c = t.concat_rows(&[a, b]).unwrap();
        assert_eq!(t.value(c).shape(), &[5]);
        assert_eq!(t.value(c).data(), &[1., 2., 3., 4., 5.]);

        let s = t.sum(c);
        t.backward(s).unwrap();
        assert_eq!(t.grad(a).unwrap().data(), &[1., 1.]);
        assert_eq!(t.grad(b).unwrap().data(), &[1., 1., 1.]);
    }

    #[test]
    fn concat_rows_rejects_mismatched_columns() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::zeros(&[2, 3]));
        let b = t.constant(Tensor::zeros(&[2, 2]));
        assert!(matches!(
            t.concat_rows(&[a, b]),
            Err(TensorError::Shape { .. })
        ));
        assert_eq!(t.concat_rows(&[]), Err(TensorError::Empty("concat_rows")));
    }

    #[test]
    fn cross_entropy_examples() {
        // One-hot and uniform probabilities.
        assert_eq!(cross_entropy_from_probs(&[0., 1., 0.], 1).unwrap(), 0.0);
        let uniform = cross_entropy_from_probs(&[0.25; 4], 2).unwrap();
        assert!((uniform - 4f64.ln()).abs() < 1e-12);
        assert!((uniform - 1.386294).abs() < 1e-6);
        let v = cross_entropy_from_probs(&[0.7, 0.2, 0.1], 1).unwrap();
        assert!((v - 1.609438).abs() < 1e-6);
        assert!(cross_entropy_from_probs(&[0.5, 0.5], 2).is_err());

        // Logit path agrees: logits ln p reproduce p exactly.
        let mut t = Tape::new();
        let logits = t.param(Tensor::row(&[0.7f64.ln(), 0.2f64.ln(), 0.1f64.ln()]));
        let l = t.cross_entropy(logits, 1).unwrap();
        assert!((t.value(l).item() - 1.609438).abs() < 1e-6);
        t.backward(l).unwrap();
        assert!(close(t.grad(logits).unwrap().data(), &[0.7, -0.8, 0.1], 1e-12));
        assert!(matches!(
            t.cross_entropy(logits, 3),
            Err(TensorError::Index { index: 3, len: 3 })
        ));
    }

    #[test]
    fn backward_examples() {
        let mut t = Tape::new();
        let x = t.param(Tensor::vector(&[0.5, -1.5, 2.0]));
        let sq = t.mul(x, x).unwrap();
        let loss = t.sum(sq);
        t.backward(loss).unwrap();
        assert_eq!(t.grad(x).unwrap().data(), &[1.0, -3.0, 4.0]);

        let mut t = Tape::new();
        let w = t.param(Tensor::matrix(1, 3, vec![0.0; 3]).unwrap());
        let x = t.constant(Tensor::matrix(3, 1, vec![0.3, -0.2, 0.9]).unwrap());
        let wx = t.matmul(w, x).unwrap();
        let y = t.tanh(wx);
        let loss = t.sum(y);
        t.backward(loss).unwrap();
        assert!(close(t.grad(w).unwrap().data(), &[0.3, -0.2, 0.9], 1e-15));
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut t = Tape::new();
        let x = t.param(Tensor::vector(&[1.0, 2.0]));
        assert_eq!(t.backward(x), Err(TensorError::NonScalar(vec![2])));
    }

    #[test]
    fn repeated_backward_accumulates_until_zeroed() {
        let mut t = Tape::new();
        let x = t.param(Tensor::vector(&[3.0]));
        let y = t.scale(x, 2.0);
        let loss = t.sum(y);
        t.backward(loss).unwrap();
        t.backward(loss).unwrap();
        assert_eq!(t.grad(x).unwrap().data(), &[4.0]);
        t.zero_grads();
        assert_eq!(t.grad(x).unwrap().data(), &[0.0]);
    }

    #[test]
    fn constants_carry_no_gradient() {
        let mut t = Tape::new();
        let c = t.constant(Tensor::vector(&[1.0]));
        let y = t.tanh(c);
        assert!(!t.requires_grad(y));
        let l = t.sum(y);
        t.backward(l).unwrap();
        assert!(t.grad(c).is_none());
    }
}
