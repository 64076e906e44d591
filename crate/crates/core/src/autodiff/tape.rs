//! Define-by-run tape. Every primitive pushes a node holding its forward value
//! and the operands needed by its adjoint; `backward` walks the nodes in
//! reverse creation order, which is a valid reverse topological order.

use std::sync::Arc;

use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::sampling::RaggedTable;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf { param: Option<ParamId> },
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Abs(Var),
    Sum(Var),
    AddBias(Var, Var),
    Elu(Var),
    GatherRows {
        x: Var,
        index: Arc<Vec<usize>>,
    },
    ScatterAddRows {
        x: Var,
        index: Arc<Vec<usize>>,
    },
    ConcatRows(Vec<Var>),
    RaggedWeightedSum {
        weights: Var,
        x: Var,
        table: Arc<RaggedTable>,
    },
    RaggedTransform {
        weights: Var,
        x: Var,
        table: Arc<RaggedTable>,
    },
    RaggedMax {
        x: Var,
        argmax: Vec<usize>,
    },
    SegmentNormalize {
        x: Var,
        table: Arc<RaggedTable>,
        degenerate: Vec<bool>,
    },
    NormalizeRows {
        x: Var,
        norms: Vec<f64>,
        eps: f64,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Computation record for one forward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints of every recorded value with respect to one scalar loss.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    params: Vec<(usize, ParamId)>,
}

impl Gradients {
    /// `None` when the loss does not depend on `v`.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    /// Adds each parameter leaf's adjoint into its accumulator. A parameter
    /// read several times accumulates every read.
    pub fn accumulate_into(&self, store: &mut ParamStore) {
        for &(node, id) in &self.params {
            if let Some(g) = &self.grads[node] {
                store.grad_mut(id).add_assign(g);
            }
        }
    }
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Splits `rows` into a batch count for a table whose domain has `in_len` rows.
fn batch_of(op: &'static str, rows: usize, in_len: usize) -> Result<usize> {
    if in_len == 0 || !rows.is_multiple_of(in_len) {
        return Err(Error::shape(
            op,
            format!("{rows} input rows is not a multiple of the table domain {in_len}"),
        ));
    }
    Ok(rows / in_len)
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Records a constant or input tensor.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf { param: None })
    }

    /// Records the current value of a trainable parameter.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        self.push(store.value(id).clone(), Op::Leaf { param: Some(id) })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        self.push(out, Op::Transpose(a))
    }

    fn zip(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        if !ta.same_shape(tb) {
            return Err(Error::shape(op, format!("{:?} vs {:?}", ta.shape(), tb.shape())));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(ta.shape().to_vec(), data)
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let t = self.value(a);
        Tensor::new(t.shape().to_vec(), t.data().iter().map(|&x| f(x)).collect()).unwrap()
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip("add", a, b, |x, y| x + y)?;
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip("sub", a, b, |x, y| x - y)?;
        Ok(self.push(out, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip("mul", a, b, |x, y| x * y)?;
        Ok(self.push(out, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.map(a, |x| c * x);
        self.push(out, Op::Scale(a, c))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let out = self.map(a, f64::abs);
        self.push(out, Op::Abs(a))
    }

    pub fn elu(&mut self, a: Var) -> Var {
        let out = self.map(a, elu);
        self.push(out, Op::Elu(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len().max(1) as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// `x[r, :] + bias[0, :]` for every row `r`.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (tx, tb) = (self.value(x), self.value(bias));
        if tb.rows() != 1 || tb.cols() != tx.cols() {
            return Err(Error::shape(
                "add_bias",
                format!("bias {:?} for input {:?}", tb.shape(), tx.shape()),
            ));
        }
        let c = tx.cols();
        let data = tx
            .data()
            .iter()
            .enumerate()
            .map(|(k, v)| v + tb.data()[k % c])
            .collect();
        let out = Tensor::matrix(tx.rows(), c, data)?;
        Ok(self.push(out, Op::AddBias(x, bias)))
    }

    /// Row `k` of the output is row `index[k]` of `x`.
    pub fn gather_rows(&mut self, x: Var, index: Arc<Vec<usize>>) -> Result<Var> {
        let tx = self.value(x);
        let c = tx.cols();
        let mut data = Vec::with_capacity(index.len() * c);
        for &r in index.iter() {
            if r >= tx.rows() {
                return Err(Error::shape("gather_rows", format!("row {r} of {}", tx.rows())));
            }
            data.extend_from_slice(tx.row(r));
        }
        let out = Tensor::matrix(index.len(), c, data)?;
        Ok(self.push(out, Op::GatherRows { x, index }))
    }

    /// Adds row `k` of `x` into row `index[k]` of a zero `[out_rows, cols]` result.
    pub fn scatter_add_rows(&mut self, x: Var, index: Arc<Vec<usize>>, out_rows: usize) -> Result<Var> {
        let tx = self.value(x);
        if tx.rows() != index.len() {
            return Err(Error::shape(
                "scatter_add_rows",
                format!("{} rows for {} indices", tx.rows(), index.len()),
            ));
        }
        let c = tx.cols();
        let mut out = Tensor::zeros(out_rows, c);
        for (k, &r) in index.iter().enumerate() {
            if r >= out_rows {
                return Err(Error::shape("scatter_add_rows", format!("row {r} of {out_rows}")));
            }
            for (o, v) in out.data_mut()[r * c..(r + 1) * c].iter_mut().zip(tx.row(k)) {
                *o += v;
            }
        }
        Ok(self.push(out, Op::ScatterAddRows { x, index }))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::shape("concat_rows", "no operands"))?;
        let c = self.value(*first).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let t = self.value(p);
            if t.cols() != c {
                return Err(Error::shape("concat_rows", format!("{} columns vs {c}", t.cols())));
            }
            rows += t.rows();
            data.extend_from_slice(t.data());
        }
        let out = Tensor::matrix(rows, c, data)?;
        Ok(self.push(out, Op::ConcatRows(parts.to_vec())))
    }

    /// Per output row `i` and batch `b`:
    /// `y[b, i] = Σ_{e ∈ row i} weights[e] · x[b, index[e]]`.
    ///
    /// `weights` is `[nnz, 1]`, `x` stacks `batch` blocks of `table.in_len()` rows.
    pub fn ragged_weighted_sum(&mut self, weights: Var, x: Var, table: &Arc<RaggedTable>) -> Result<Var> {
        let (tw, tx) = (self.value(weights), self.value(x));
        if tw.rows() != table.nnz() || tw.cols() != 1 {
            return Err(Error::shape(
                "ragged_weighted_sum",
                format!("weights {:?} for {} slots", tw.shape(), table.nnz()),
            ));
        }
        let batch = batch_of("ragged_weighted_sum", tx.rows(), table.in_len())?;
        let c = tx.cols();
        let (n_in, n_out) = (table.in_len(), table.rows());
        let mut out = vec![0.0; batch * n_out * c];
        let idx = table.indices();
        for b in 0..batch {
            for i in 0..n_out {
                let orow = &mut out[(b * n_out + i) * c..(b * n_out + i + 1) * c];
                for e in table.row_range(i) {
                    let w = tw.data()[e];
                    for (o, v) in orow.iter_mut().zip(tx.row(b * n_in + idx[e])) {
                        *o += w * v;
                    }
                }
            }
        }
        let out = Tensor::matrix(batch * n_out, c, out)?;
        Ok(self.push(
            out,
            Op::RaggedWeightedSum {
                weights,
                x,
                table: table.clone(),
            },
        ))
    }

    /// Per-slot linear maps:
    /// `y[b, i] = Σ_{e ∈ row i} W_eᵀ · x[b, index[e]]` with `W_e` the `cin × cout`
    /// matrix stored row-major in row `e` of `weights` (`[nnz, cin * cout]`).
    pub fn ragged_transform(&mut self, weights: Var, x: Var, table: &Arc<RaggedTable>, cout: usize) -> Result<Var> {
        let (tw, tx) = (self.value(weights), self.value(x));
        let cin = tx.cols();
        if tw.rows() != table.nnz() || tw.cols() != cin * cout {
            return Err(Error::shape(
                "ragged_transform",
                format!(
                    "weights {:?} for {} slots of {cin}x{cout} kernels",
                    tw.shape(),
                    table.nnz()
                ),
            ));
        }
        let batch = batch_of("ragged_transform", tx.rows(), table.in_len())?;
        let (n_in, n_out) = (table.in_len(), table.rows());
        let idx = table.indices();
        let mut out = vec![0.0; batch * n_out * cout];
        for b in 0..batch {
            for i in 0..n_out {
                let orow = &mut out[(b * n_out + i) * cout..(b * n_out + i + 1) * cout];
                for e in table.row_range(i) {
                    let src = tx.row(b * n_in + idx[e]);
                    let w = tw.row(e);
                    for (ci, &xv) in src.iter().enumerate() {
                        for (o, wv) in orow.iter_mut().zip(&w[ci * cout..(ci + 1) * cout]) {
                            *o += wv * xv;
                        }
                    }
                }
            }
        }
        let out = Tensor::matrix(batch * n_out, cout, out)?;
        Ok(self.push(
            out,
            Op::RaggedTransform {
                weights,
                x,
                table: table.clone(),
            },
        ))
    }

    /// Channel-wise maximum over each neighborhood; ties resolve to the first
    /// slot in row order.
    pub fn ragged_max(&mut self, x: Var, table: &Arc<RaggedTable>) -> Result<Var> {
        let tx = self.value(x);
        let batch = batch_of("ragged_max", tx.rows(), table.in_len())?;
        let c = tx.cols();
        let (n_in, n_out) = (table.in_len(), table.rows());
        let idx = table.indices();
        let mut out = vec![f64::NEG_INFINITY; batch * n_out * c];
        let mut argmax = vec![0usize; batch * n_out * c];
        for b in 0..batch {
            for i in 0..n_out {
                let base = (b * n_out + i) * c;
                for e in table.row_range(i) {
                    let src_row = b * n_in + idx[e];
                    for (ch, &v) in tx.row(src_row).iter().enumerate() {
                        if v > out[base + ch] {
                            out[base + ch] = v;
                            argmax[base + ch] = src_row * c + ch;
                        }
                    }
                }
            }
        }
        let out = Tensor::matrix(batch * n_out, c, out)?;
        Ok(self.push(out, Op::RaggedMax { x, argmax }))
    }

    /// Divides each slot of `x` (`[nnz, 1]`) by the sum of its row. A row that
    /// sums to zero becomes uniform `1 / Eᵢ` and passes no gradient.
    pub fn segment_normalize(&mut self, x: Var, table: &Arc<RaggedTable>) -> Result<Var> {
        let tx = self.value(x);
        if tx.rows() != table.nnz() || tx.cols() != 1 {
            return Err(Error::shape(
                "segment_normalize",
                format!("{:?} for {} slots", tx.shape(), table.nnz()),
            ));
        }
        let mut out = vec![0.0; table.nnz()];
        let mut degenerate = vec![false; table.rows()];
        for (i, flag) in degenerate.iter_mut().enumerate() {
            let range = table.row_range(i);
            let s: f64 = tx.data()[range.clone()].iter().sum();
            if s == 0.0 {
                log::warn!("neighborhood {i} has all-zero densities; using a uniform average");
                *flag = true;
                let u = 1.0 / range.len() as f64;
                out[range].iter_mut().for_each(|o| *o = u);
            } else {
                for e in range {
                    out[e] = tx.data()[e] / s;
                }
            }
        }
        Ok(self.push(
            Tensor::column(out),
            Op::SegmentNormalize {
                x,
                table: table.clone(),
                degenerate,
            },
        ))
    }

    /// Scales every row to unit Euclidean norm, dividing by `max(‖row‖, eps)`.
    pub fn normalize_rows(&mut self, x: Var, eps: f64) -> Var {
        let tx = self.value(x);
        let c = tx.cols();
        let norms: Vec<f64> = (0..tx.rows())
            .map(|r| tx.row(r).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        let data = tx
            .data()
            .iter()
            .enumerate()
            .map(|(k, v)| v / norms[k / c].max(eps))
            .collect();
        let out = Tensor::new(tx.shape().to_vec(), data).unwrap();
        self.push(out, Op::NormalizeRows { x, norms, eps })
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::InvalidInput(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::new(self.value(loss).shape().to_vec(), vec![1.0])?);
        let mut params = Vec::new();
        for n in (0..=loss.0).rev() {
            let node = &self.nodes[n];
            if let Op::Leaf { param: Some(id) } = node.op {
                params.push((n, id));
            }
            let Some(g) = grads[n].take() else { continue };
            self.propagate(node, &g, &mut grads)?;
            grads[n] = Some(g);
        }
        params.reverse();
        Ok(Gradients { grads, params })
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let mut acc = |v: Var, t: Tensor| match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&t),
            slot @ None => *slot = Some(t),
        };
        let like = |v: Var, data: Vec<f64>| Tensor::new(self.value(v).shape().to_vec(), data).unwrap();
        match &node.op {
            Op::Leaf { .. } => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                acc(*a, g.matmul(&tb.transpose())?);
                acc(*b, ta.transpose().matmul(g)?);
            }
            Op::Transpose(a) => acc(*a, g.transpose()),
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, like(*b, g.data().iter().map(|v| -v).collect()));
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                acc(*a, like(*a, g.data().iter().zip(tb.data()).map(|(g, y)| g * y).collect()));
                acc(*b, like(*b, g.data().iter().zip(ta.data()).map(|(g, x)| g * x).collect()));
            }
            Op::Scale(a, c) => acc(*a, like(*a, g.data().iter().map(|v| c * v).collect())),
            Op::Abs(a) => {
                let ta = self.value(*a);
                acc(*a, like(*a, g.data().iter().zip(ta.data()).map(|(g, x)| g * sign(*x)).collect()));
            }
            Op::Elu(a) => {
                let ta = self.value(*a);
                let d = g
                    .data()
                    .iter()
                    .zip(ta.data())
                    .map(|(g, &x)| if x > 0.0 { *g } else { g * x.exp() })
                    .collect();
                acc(*a, like(*a, d));
            }
            Op::Sum(a) => {
                let n = self.value(*a).len();
                acc(*a, like(*a, vec![g.data()[0]; n]));
            }
            Op::AddBias(x, bias) => {
                acc(*x, g.clone());
                let c = g.cols();
                let mut db = vec![0.0; c];
                for (k, v) in g.data().iter().enumerate() {
                    db[k % c] += v;
                }
                acc(*bias, like(*bias, db));
            }
            Op::GatherRows { x, index } => {
                let tx = self.value(*x);
                let c = tx.cols();
                let mut dx = vec![0.0; tx.len()];
                for (k, &r) in index.iter().enumerate() {
                    for (d, v) in dx[r * c..(r + 1) * c].iter_mut().zip(g.row(k)) {
                        *d += v;
                    }
                }
                acc(*x, like(*x, dx));
            }
            Op::ScatterAddRows { x, index } => {
                let c = g.cols();
                let mut dx = Vec::with_capacity(index.len() * c);
                for &r in index.iter() {
                    dx.extend_from_slice(g.row(r));
                }
                acc(*x, like(*x, dx));
            }
            Op::ConcatRows(parts) => {
                let mut start = 0;
                for &p in parts {
                    let len = self.value(p).len();
                    acc(p, like(p, g.data()[start..start + len].to_vec()));
                    start += len;
                }
            }
            Op::RaggedWeightedSum { weights, x, table } => {
                let (tw, tx) = (self.value(*weights), self.value(*x));
                let c = tx.cols();
                let (n_in, n_out) = (table.in_len(), table.rows());
                let batch = tx.rows() / n_in;
                let idx = table.indices();
                let mut dw = vec![0.0; tw.len()];
                let mut dx = vec![0.0; tx.len()];
                for b in 0..batch {
                    for i in 0..n_out {
                        let grow = g.row(b * n_out + i);
                        for e in table.row_range(i) {
                            let src = b * n_in + idx[e];
                            let w = tw.data()[e];
                            let mut dot = 0.0;
                            for ((d, xv), gv) in dx[src * c..(src + 1) * c].iter_mut().zip(tx.row(src)).zip(grow) {
                                *d += w * gv;
                                dot += xv * gv;
                            }
                            dw[e] += dot;
                        }
                    }
                }
                acc(*weights, like(*weights, dw));
                acc(*x, like(*x, dx));
            }
            Op::RaggedTransform { weights, x, table } => {
                let (tw, tx) = (self.value(*weights), self.value(*x));
                let cin = tx.cols();
                let cout = g.cols();
                let (n_in, n_out) = (table.in_len(), table.rows());
                let batch = tx.rows() / n_in;
                let idx = table.indices();
                let mut dw = vec![0.0; tw.len()];
                let mut dx = vec![0.0; tx.len()];
                for b in 0..batch {
                    for i in 0..n_out {
                        let grow = g.row(b * n_out + i);
                        for e in table.row_range(i) {
                            let src = b * n_in + idx[e];
                            let w = tw.row(e);
                            let xrow = tx.row(src);
                            let dwrow = &mut dw[e * cin * cout..(e + 1) * cin * cout];
                            for ci in 0..cin {
                                let wk = &w[ci * cout..(ci + 1) * cout];
                                let mut s = 0.0;
                                for (wv, gv) in wk.iter().zip(grow) {
                                    s += wv * gv;
                                }
                                dx[src * cin + ci] += s;
                                let xv = xrow[ci];
                                for (d, gv) in dwrow[ci * cout..(ci + 1) * cout].iter_mut().zip(grow) {
                                    *d += xv * gv;
                                }
                            }
                        }
                    }
                }
                acc(*weights, like(*weights, dw));
                acc(*x, like(*x, dx));
            }
            Op::RaggedMax { x, argmax } => {
                let mut dx = vec![0.0; self.value(*x).len()];
                for (k, &src) in argmax.iter().enumerate() {
                    dx[src] += g.data()[k];
                }
                acc(*x, like(*x, dx));
            }
            Op::SegmentNormalize { x, table, degenerate } => {
                let tx = self.value(*x);
                let y = &node.value;
                let mut dx = vec![0.0; tx.len()];
                for (i, _) in degenerate.iter().enumerate().filter(|(_, &d)| !d) {
                    let range = table.row_range(i);
                    let s: f64 = tx.data()[range.clone()].iter().sum();
                    let gy: f64 = range.clone().map(|e| g.data()[e] * y.data()[e]).sum();
                    for e in range {
                        dx[e] = (g.data()[e] - gy) / s;
                    }
                }
                acc(*x, like(*x, dx));
            }
            Op::NormalizeRows { x, norms, eps } => {
                let y = &node.value;
                let c = y.cols();
                let mut dx = vec![0.0; y.len()];
                for (r, &norm) in norms.iter().enumerate() {
                    let (yr, gr) = (y.row(r), g.row(r));
                    if norm > *eps {
                        let proj: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for k in 0..c {
                            dx[r * c + k] = (gr[k] - yr[k] * proj) / norm;
                        }
                    } else {
                        for k in 0..c {
                            dx[r * c + k] = gr[k] / eps;
                        }
                    }
                }
                acc(*x, like(*x, dx));
            }
        }
        Ok(())
    }
}
