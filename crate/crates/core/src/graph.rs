//! Define-by-run computation graph with reverse-mode differentiation.
//!
//! A [`Graph`] is rebuilt for every forward pass (recurrent chunks have
//! variable length, so a static graph buys nothing). Nodes live in an
//! arena in topological order; [`Graph::backward`] walks it once in
//! reverse and returns gradients keyed by [`ParamId`].
//!
//! Graphs borrow their [`ParamSet`] immutably: forward passes are pure,
//! so independent graphs may be evaluated on independent threads and the
//! caller reduces gradients in index order.

use crate::error::{Error, Result};
use crate::params::{Gradients, ParamId, ParamSet};
use crate::tensor::{axpy, dot, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul { a: NodeId, b: NodeId },
    MatVec { w: NodeId, x: NodeId },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    Scale { x: NodeId, s: f64 },
    Tanh { x: NodeId },
    Sigmoid { x: NodeId },
    Relu { x: NodeId },
    Exp { x: NodeId },
    Log { x: NodeId },
    Softplus { x: NodeId },
    Softmax { x: NodeId },
    LogSoftmax { x: NodeId },
    Sum { x: NodeId },
    Mean { x: NodeId },
    Concat { xs: Vec<NodeId> },
    Gather { x: NodeId, idx: Vec<usize> },
    Index { x: NodeId, i: usize },
    Row { m: NodeId, i: usize },
    Minimum { a: NodeId, b: NodeId },
    Clamp { x: NodeId, lo: f64, hi: f64 },
    SMul { s: NodeId, x: NodeId },
}

struct Node {
    value: Tensor,
    op: Op,
}

pub struct Graph<'p> {
    params: &'p ParamSet,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<NodeId>>,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamSet) -> Self {
        Graph {
            params,
            nodes: Vec::with_capacity(64),
            param_nodes: vec![None; params.len()],
        }
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Value of a one-element node.
    pub fn scalar_value(&self, id: NodeId) -> Result<f64> {
        self.nodes[id.0].value.scalar_value()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Result<NodeId> {
        // Debug-mode finiteness guard: every primitive's output is checked
        // before anything downstream can consume it.
        if cfg!(debug_assertions) && !value.all_finite() {
            return Err(Error::numeric(format!(
                "non-finite output from {:?}",
                op_name(&op)
            )));
        }
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { value, op });
        Ok(id)
    }

    pub fn constant(&mut self, t: Tensor) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { value: t, op: Op::Constant });
        id
    }

    pub fn constant_vector(&mut self, v: &[f64]) -> NodeId {
        self.constant(Tensor::vector(v.to_vec()))
    }

    pub fn constant_scalar(&mut self, v: f64) -> NodeId {
        self.constant(Tensor::scalar(v))
    }

    /// Leaf node for a parameter; memoized so gradient contributions from
    /// every use of the parameter accumulate on one node.
    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(n) = self.param_nodes[id.index()] {
            return n;
        }
        let value = self.params.get(id).clone();
        let node = NodeId(self.nodes.len());
        self.nodes.push(Node { value, op: Op::Param(id) });
        self.param_nodes[id.index()] = Some(node);
        node
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, k) = self.value(a).matrix_dims()?;
        let (k2, n) = self.value(b).matrix_dims()?;
        if k != k2 {
            return Err(Error::shape(format!(
                "matmul inner dims disagree: {m}x{k} vs {k2}x{n}"
            )));
        }
        let av = self.value(a).data();
        let bv = self.value(b).data();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let out_row = &mut out[i * n..(i + 1) * n];
            for kk in 0..k {
                let aik = av[i * k + kk];
                axpy(out_row, aik, &bv[kk * n..(kk + 1) * n]);
            }
        }
        self.push(Tensor::from_parts(vec![m, n], out), Op::MatMul { a, b })
    }

    /// w: m×k matrix, x: length-k vector -> length-m vector.
    pub fn matvec(&mut self, w: NodeId, x: NodeId) -> Result<NodeId> {
        let (m, k) = self.value(w).matrix_dims()?;
        let n = self.value(x).vector_len()?;
        if k != n {
            return Err(Error::shape(format!(
                "matvec dims disagree: {m}x{k} matrix vs length-{n} vector"
            )));
        }
        let wv = self.value(w).data();
        let xv = self.value(x).data();
        let mut out = Vec::with_capacity(m);
        for i in 0..m {
            out.push(dot(&wv[i * k..(i + 1) * k], xv));
        }
        self.push(Tensor::from_parts(vec![m], out), Op::MatVec { w, x })
    }

    fn binary_elementwise(
        &mut self,
        a: NodeId,
        b: NodeId,
        name: &str,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<NodeId> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(Error::shape(format!(
                "{name}: shapes {:?} and {:?} differ",
                self.value(a).shape(),
                self.value(b).shape()
            )));
        }
        let shape = self.value(a).shape().to_vec();
        let out: Vec<f64> = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| f(*x, *y))
            .collect();
        self.push(Tensor::from_parts(shape, out), op)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_elementwise(a, b, "add", |x, y| x + y, Op::Add { a, b })
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_elementwise(a, b, "sub", |x, y| x - y, Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_elementwise(a, b, "mul", |x, y| x * y, Op::Mul { a, b })
    }

    pub fn minimum(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_elementwise(a, b, "minimum", f64::min, Op::Minimum { a, b })
    }

    pub fn scale(&mut self, x: NodeId, s: f64) -> Result<NodeId> {
        let shape = self.value(x).shape().to_vec();
        let out: Vec<f64> = self.value(x).data().iter().map(|v| v * s).collect();
        self.push(Tensor::from_parts(shape, out), Op::Scale { x, s })
    }

    fn unary(&mut self, x: NodeId, f: impl Fn(f64) -> f64, op: Op) -> Result<NodeId> {
        let shape = self.value(x).shape().to_vec();
        let out: Vec<f64> = self.value(x).data().iter().map(|v| f(*v)).collect();
        self.push(Tensor::from_parts(shape, out), op)
    }

    pub fn tanh(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(x, f64::tanh, Op::Tanh { x })
    }

    pub fn sigmoid(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(x, sigmoid, Op::Sigmoid { x })
    }

    pub fn relu(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(x, |v| if v > 0.0 { v } else { 0.0 }, Op::Relu { x })
    }

    pub fn exp(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(x, f64::exp, Op::Exp { x })
    }

    pub fn log(&mut self, x: NodeId) -> Result<NodeId> {
        if let Some(v) = self.value(x).data().iter().find(|v| **v <= 0.0) {
            return Err(Error::domain(format!("log of non-positive entry {v}")));
        }
        self.unary(x, f64::ln, Op::Log { x })
    }

    pub fn softplus(&mut self, x: NodeId) -> Result<NodeId> {
        self.unary(x, softplus, Op::Softplus { x })
    }

    pub fn softmax(&mut self, x: NodeId) -> Result<NodeId> {
        let n = self.value(x).vector_len()?;
        if n == 0 {
            return Err(Error::shape("softmax of empty vector"));
        }
        let out = softmax_stable(self.value(x).data());
        self.push(Tensor::from_parts(vec![n], out), Op::Softmax { x })
    }

    pub fn log_softmax(&mut self, x: NodeId) -> Result<NodeId> {
        let n = self.value(x).vector_len()?;
        if n == 0 {
            return Err(Error::shape("log_softmax of empty vector"));
        }
        let v = self.value(x).data();
        let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = v.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
        let out: Vec<f64> = v.iter().map(|x| x - max - lse).collect();
        self.push(Tensor::from_parts(vec![n], out), Op::LogSoftmax { x })
    }

    pub fn sum(&mut self, x: NodeId) -> Result<NodeId> {
        let s: f64 = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum { x })
    }

    pub fn mean(&mut self, x: NodeId) -> Result<NodeId> {
        let n = self.value(x).numel();
        if n == 0 {
            return Err(Error::shape("mean of empty tensor"));
        }
        let s: f64 = self.value(x).data().iter().sum::<f64>() / n as f64;
        self.push(Tensor::scalar(s), Op::Mean { x })
    }

    pub fn concat(&mut self, xs: &[NodeId]) -> Result<NodeId> {
        if xs.is_empty() {
            return Err(Error::shape("concat of zero vectors"));
        }
        let mut out = Vec::new();
        for &x in xs {
            self.value(x).vector_len()?;
            out.extend_from_slice(self.value(x).data());
        }
        let n = out.len();
        self.push(Tensor::from_parts(vec![n], out), Op::Concat { xs: xs.to_vec() })
    }

    /// Sub-vector gathered at `idx`, in mask order. Duplicate indices are
    /// allowed; gradients scatter-add.
    pub fn gather(&mut self, x: NodeId, idx: &[usize]) -> Result<NodeId> {
        let n = self.value(x).vector_len()?;
        if let Some(i) = idx.iter().find(|i| **i >= n) {
            return Err(Error::shape(format!(
                "gather index {i} out of range for length-{n} vector"
            )));
        }
        let v = self.value(x).data();
        let out: Vec<f64> = idx.iter().map(|i| v[*i]).collect();
        let m = out.len();
        self.push(
            Tensor::from_parts(vec![m], out),
            Op::Gather { x, idx: idx.to_vec() },
        )
    }

    /// Single element as a scalar node.
    pub fn index(&mut self, x: NodeId, i: usize) -> Result<NodeId> {
        let n = self.value(x).vector_len()?;
        if i >= n {
            return Err(Error::shape(format!(
                "index {i} out of range for length-{n} vector"
            )));
        }
        let v = self.value(x).data()[i];
        self.push(Tensor::scalar(v), Op::Index { x, i })
    }

    /// Row `i` of a matrix node, as a vector.
    pub fn row(&mut self, m: NodeId, i: usize) -> Result<NodeId> {
        let (rows, cols) = self.value(m).matrix_dims()?;
        if i >= rows {
            return Err(Error::shape(format!("row {i} out of range for {rows} rows")));
        }
        let out = self.value(m).data()[i * cols..(i + 1) * cols].to_vec();
        self.push(Tensor::from_parts(vec![cols], out), Op::Row { m, i })
    }

    pub fn clamp(&mut self, x: NodeId, lo: f64, hi: f64) -> Result<NodeId> {
        if lo > hi {
            return Err(Error::contract(format!("clamp bounds inverted: {lo} > {hi}")));
        }
        self.unary(x, |v| v.clamp(lo, hi), Op::Clamp { x, lo, hi })
    }

    /// Scalar node times vector node.
    pub fn smul(&mut self, s: NodeId, x: NodeId) -> Result<NodeId> {
        let sv = self.scalar_value(s)?;
        let shape = self.value(x).shape().to_vec();
        let out: Vec<f64> = self.value(x).data().iter().map(|v| v * sv).collect();
        self.push(Tensor::from_parts(shape, out), Op::SMul { s, x })
    }

    /// Gradients of a scalar loss with respect to every parameter.
    /// Parameters the loss does not reach get zero gradients.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if !self.value(loss).is_scalar() {
            return Err(Error::contract(format!(
                "backward of non-scalar node with shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut bufs: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        bufs[loss.0] = Some(vec![1.0]);

        let mut grads = Gradients::zeros_like(self.params);
        for i in (0..self.nodes.len()).rev() {
            let Some(g) = bufs[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Constant => {}
                Op::Param(pid) => {
                    axpy(grads.get_mut(*pid).data_mut(), 1.0, &g);
                }
                Op::MatMul { a, b } => {
                    let (m, k) = self.nodes[a.0].value.matrix_dims().unwrap();
                    let n = self.nodes[b.0].value.matrix_dims().unwrap().1;
                    let av = self.nodes[a.0].value.data();
                    let bv = self.nodes[b.0].value.data();
                    {
                        // dA = G @ B^T
                        let da = buf(&mut bufs, *a, m * k);
                        for i in 0..m {
                            for kk in 0..k {
                                da[i * k + kk] += dot(&g[i * n..(i + 1) * n], &bv[kk * n..(kk + 1) * n]);
                            }
                        }
                    }
                    {
                        // dB = A^T @ G
                        let db = buf(&mut bufs, *b, k * n);
                        for ii in 0..m {
                            for kk in 0..k {
                                axpy(
                                    &mut db[kk * n..(kk + 1) * n],
                                    av[ii * k + kk],
                                    &g[ii * n..(ii + 1) * n],
                                );
                            }
                        }
                    }
                }
                Op::MatVec { w, x } => {
                    let (m, k) = self.nodes[w.0].value.matrix_dims().unwrap();
                    let wv = self.nodes[w.0].value.data();
                    let xv = self.nodes[x.0].value.data();
                    {
                        let dw = buf(&mut bufs, *w, m * k);
                        for i in 0..m {
                            axpy(&mut dw[i * k..(i + 1) * k], g[i], xv);
                        }
                    }
                    {
                        let dx = buf(&mut bufs, *x, k);
                        for i in 0..m {
                            axpy(dx, g[i], &wv[i * k..(i + 1) * k]);
                        }
                    }
                }
                Op::Add { a, b } => {
                    axpy(buf(&mut bufs, *a, g.len()), 1.0, &g);
                    axpy(buf(&mut bufs, *b, g.len()), 1.0, &g);
                }
                Op::Sub { a, b } => {
                    axpy(buf(&mut bufs, *a, g.len()), 1.0, &g);
                    axpy(buf(&mut bufs, *b, g.len()), -1.0, &g);
                }
                Op::Mul { a, b } => {
                    let av = self.nodes[a.0].value.data().to_vec();
                    let bv = self.nodes[b.0].value.data();
                    {
                        let da = buf(&mut bufs, *a, g.len());
                        for j in 0..g.len() {
                            da[j] += g[j] * bv[j];
                        }
                    }
                    {
                        let db = buf(&mut bufs, *b, g.len());
                        for j in 0..g.len() {
                            db[j] += g[j] * av[j];
                        }
                    }
                }
                Op::Minimum { a, b } => {
                    let av = self.nodes[a.0].value.data();
                    let bv = self.nodes[b.0].value.data();
                    let takes_a: Vec<bool> =
                        av.iter().zip(bv).map(|(x, y)| x <= y).collect();
                    {
                        let da = buf(&mut bufs, *a, g.len());
                        for j in 0..g.len() {
                            if takes_a[j] {
                                da[j] += g[j];
                            }
                        }
                    }
                    {
                        let db = buf(&mut bufs, *b, g.len());
                        for j in 0..g.len() {
                            if !takes_a[j] {
                                db[j] += g[j];
                            }
                        }
                    }
                }
                Op::Scale { x, s } => {
                    axpy(buf(&mut bufs, *x, g.len()), *s, &g);
                }
                Op::Tanh { x } => {
                    let y = self.nodes[i].value.data();
                    let dx = buf(&mut bufs, *x, g.len());
                    for j in 0..g.len() {
                        dx[j] += g[j] * (1.0 - y[j] * y[j]);
                    }
                }
                Op::Sigmoid { x } => {
                    let y = self.nodes[i].value.data();
                    let dx = buf(&mut bufs, *x, g.len());
                    for j in 0..g.len() {
                        dx[j] += g[j] * y[j] * (1.0 - y[j]);
                    }
                }
                Op::Relu { x } => {
                    let xv = self.nodes[x.0].value.data();
                    let dx = buf(&mut bufs, *x, g.len());
                    for j in 0..g.len() {
                        if xv[j] > 0.0 {
                            dx[j] += g[j];
                        }
                    }
                }
                Op::Exp { x } => {
                    let y = self.nodes[i].value.data();
                    let dx = buf(&mut bufs, *x, g.len());
                    for j in 0..g.len() {
                        dx[j] += g[j] * y[j];
                    }
                }
                Op::Log { x } => {
                    let xv = self.nodes[x.0].value.data();
                    let dx = buf(&mut bufs, *x, g.len());
                    for j in 0..g.len() {
                        dx[j] += g[j] / xv[j];
                    }
                }
                Op::Softplus { x } => {
                    let xv = self.nodes[x.0].value.data();
                    let dx = buf(&mut bufs, *x, g.len());
                    for j in 0..g.len() {
                        dx[j] += g[j] * sigmoid(xv[j]);
                    }
                }
                Op::Softmax { x } => {
                    let y = self.nodes[i].value.data();
                    let gy = dot(&g, y);
                    let dx = buf(&mut bufs, *x, g.len());
                    for j in 0..g.len() {
                        dx[j] += y[j] * (g[j] - gy);
                    }
                }
                Op::LogSoftmax { x } => {
                    let y = self.nodes[i].value.data();
                    let gsum: f64 = g.iter().sum();
                    let dx = buf(&mut bufs, *x, g.len());
                    for j in 0..g.len() {
                        dx[j] += g[j] - y[j].exp() * gsum;
                    }
                }
                Op::Sum { x } => {
                    let n = self.nodes[x.0].value.numel();
                    let dx = buf(&mut bufs, *x, n);
                    for v in dx.iter_mut() {
                        *v += g[0];
                    }
                }
                Op::Mean { x } => {
                    let n = self.nodes[x.0].value.numel();
                    let dx = buf(&mut bufs, *x, n);
                    let s = g[0] / n as f64;
                    for v in dx.iter_mut() {
                        *v += s;
                    }
                }
                Op::Concat { xs } => {
                    let mut off = 0;
                    for &x in xs {
                        let n = self.nodes[x.0].value.numel();
                        axpy(buf(&mut bufs, x, n), 1.0, &g[off..off + n]);
                        off += n;
                    }
                }
                Op::Gather { x, idx } => {
                    let n = self.nodes[x.0].value.numel();
                    let dx = buf(&mut bufs, *x, n);
                    for (j, &src) in idx.iter().enumerate() {
                        dx[src] += g[j];
                    }
                }
                Op::Index { x, i: at } => {
                    let n = self.nodes[x.0].value.numel();
                    buf(&mut bufs, *x, n)[*at] += g[0];
                }
                Op::Row { m, i: at } => {
                    let (_, cols) = self.nodes[m.0].value.matrix_dims().unwrap();
                    let dm = buf(&mut bufs, *m, self.nodes[m.0].value.numel());
                    axpy(&mut dm[at * cols..(at + 1) * cols], 1.0, &g);
                }
                Op::Clamp { x, lo, hi } => {
                    let xv = self.nodes[x.0].value.data();
                    let dx = buf(&mut bufs, *x, g.len());
                    for j in 0..g.len() {
                        if xv[j] > *lo && xv[j] < *hi {
                            dx[j] += g[j];
                        }
                    }
                }
                Op::SMul { s, x } => {
                    let sv = self.nodes[s.0].value.data()[0];
                    let xv = self.nodes[x.0].value.data();
                    buf(&mut bufs, *s, 1)[0] += dot(&g, xv);
                    axpy(buf(&mut bufs, *x, g.len()), sv, &g);
                }
            }
        }
        if cfg!(debug_assertions) && !grads.all_finite() {
            return Err(Error::numeric("non-finite gradient after backward"));
        }
        Ok(grads)
    }
}

fn buf(bufs: &mut [Option<Vec<f64>>], id: NodeId, n: usize) -> &mut Vec<f64> {
    bufs[id.0].get_or_insert_with(|| vec![0.0; n])
}

fn op_name(op: &Op) -> &'static str {
    match op {
        Op::Constant => "constant",
        Op::Param(_) => "param",
        Op::MatMul { .. } => "matmul",
        Op::MatVec { .. } => "matvec",
        Op::Add { .. } => "add",
        Op::Sub { .. } => "sub",
        Op::Mul { .. } => "mul",
        Op::Scale { .. } => "scale",
        Op::Tanh { .. } => "tanh",
        Op::Sigmoid { .. } => "sigmoid",
        Op::Relu { .. } => "relu",
        Op::Exp { .. } => "exp",
        Op::Log { .. } => "log",
        Op::Softplus { .. } => "softplus",
        Op::Softmax { .. } => "softmax",
        Op::LogSoftmax { .. } => "log_softmax",
        Op::Sum { .. } => "sum",
        Op::Mean { .. } => "mean",
        Op::Concat { .. } => "concat",
        Op::Gather { .. } => "gather",
        Op::Index { .. } => "index",
        Op::Row { .. } => "row",
        Op::Minimum { .. } => "minimum",
        Op::Clamp { .. } => "clamp",
        Op::SMul { .. } => "smul",
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Max-subtracted softmax of a slice.
pub(crate) fn softmax_stable(v: &[f64]) -> Vec<f64> {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let z: f64 = out.iter().sum();
    for x in &mut out {
        *x /= z;
    }
    out
}

/// Identity helper that pins the higher-ranked lifetime signature of a
/// graph-builder closure so it can be invoked directly and also passed to
/// [`finite_diff_check`].
pub fn graph_builder<F>(f: F) -> F
where
    F: for<'a> FnMut(&'a ParamSet) -> Result<(Graph<'a>, NodeId)>,
{
    f
}

/// Compare the tape gradient of a scalar loss against central finite
/// differences (h = 1e-6), coordinate by coordinate, over every parameter
/// in the set. Returns the maximum relative error, with the relative
/// denominator max(|analytic|, |numeric|, 1e-8).
pub fn finite_diff_check<F>(params: &mut ParamSet, mut build: F) -> Result<f64>
where
    F: for<'a> FnMut(&'a ParamSet) -> Result<(Graph<'a>, NodeId)>,
{
    let analytic = {
        let (graph, loss) = build(params)?;
        graph.backward(loss)?
    };
    let h = 1e-6;
    let mut max_rel: f64 = 0.0;
    for p in 0..params.len() {
        let pid = crate::params::ParamId(p);
        for j in 0..params.get(pid).numel() {
            let orig = params.get(pid).data()[j];
            params.get_mut(pid).data_mut()[j] = orig + h;
            let f_plus = {
                let (graph, loss) = build(params)?;
                graph.scalar_value(loss)?
            };
            params.get_mut(pid).data_mut()[j] = orig - h;
            let f_minus = {
                let (graph, loss) = build(params)?;
                graph.scalar_value(loss)?
            };
            params.get_mut(pid).data_mut()[j] = orig;
            let numeric = (f_plus - f_minus) / (2.0 * h);
            let a = analytic.get(pid).data()[j];
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            max_rel = max_rel.max((a - numeric).abs() / denom);
        }
    }
    Ok(max_rel)
}
