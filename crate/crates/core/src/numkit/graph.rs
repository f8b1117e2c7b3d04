//! Tape-style reverse-mode differentiation over [`Array`] values.
//!
//! Every operation appends a node holding its forward value. Because nodes
//! can only reference earlier nodes, the tape order is already a topological
//! order and [`Graph::backward`] is a single reverse sweep.

use super::{Array, ParamSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Identity,
    Tanh,
    Relu,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative expressed through the activation's output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf { param: Option<String> },
    MatMul(NodeId, NodeId),
    AddBias(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Activate(NodeId, Activation),
    Exp(NodeId),
    Square(NodeId),
    LogSoftmax(NodeId),
    Gather(NodeId, Vec<usize>),
    Clamp(NodeId, f64, f64),
    Minimum(NodeId, NodeId),
    Mean(NodeId),
    Sum(NodeId),
    SumRows(NodeId),
}

#[derive(Debug, Clone)]
struct Node {
    value: Array,
    op: Op,
}

/// Recorded computation. Rebuilt for every forward pass.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients aligned index-for-index with the [`ParamSet`] passed to
/// [`Graph::backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    grads: Vec<Array>,
}

impl Gradients {
    pub fn zeros_like(params: &ParamSet) -> Self {
        Self {
            grads: params.iter().map(|(_, a)| Array::zeros(a.shape())).collect(),
        }
    }

    /// Treats the arrays of `values` as gradients.
    pub fn from_params(values: &ParamSet) -> Self {
        Self {
            grads: values.iter().map(|(_, a)| a.clone()).collect(),
        }
    }

    pub fn get(&self, index: usize) -> &Array {
        &self.grads[index]
    }

    pub fn len(&self) -> usize {
        self.grads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Array> {
        self.grads.iter()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Array {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Array, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        NodeId(self.nodes.len() - 1)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, value: Array) -> NodeId {
        self.push(value, Op::Leaf { param: None })
    }

    /// A leaf bound to the named entry of `params`.
    pub fn param(&mut self, params: &ParamSet, name: &str) -> Result<NodeId> {
        let value = params.get(name)?.clone();
        Ok(self.push(
            value,
            Op::Leaf {
                param: Some(name.to_owned()),
            },
        ))
    }

    fn same_shape(&self, ctx: &str, a: NodeId, b: NodeId) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::shape(ctx, sa, sb));
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (n, k) = self.value(a).dims2("matmul lhs")?;
        let (k2, m) = self.value(b).dims2("matmul rhs")?;
        if k != k2 {
            return Err(Error::shape("matmul inner dimension", &[k], &[k2]));
        }
        let out = matmul(self.value(a).data(), self.value(b).data(), n, k, m);
        Ok(self.push(Array::new(vec![n, m], out)?, Op::MatMul(a, b)))
    }

    /// `x[n, m] + bias[m]`, broadcast over rows.
    pub fn add_bias(&mut self, x: NodeId, bias: NodeId) -> Result<NodeId> {
        let (n, m) = self.value(x).dims2("add_bias")?;
        if self.value(bias).shape() != [m] {
            return Err(Error::shape("add_bias", &[m], self.value(bias).shape()));
        }
        let b = self.value(bias).data();
        let mut out = self.value(x).data().to_vec();
        for row in out.chunks_mut(m) {
            for (o, bv) in row.iter_mut().zip(b) {
                *o += bv;
            }
        }
        Ok(self.push(Array::new(vec![n, m], out)?, Op::AddBias(x, bias)))
    }

    fn zip_with(&mut self, ctx: &str, a: NodeId, b: NodeId, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<NodeId> {
        self.same_shape(ctx, a, b)?;
        let va = self.value(a);
        let data = va
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let value = Array::new(va.shape().to_vec(), data)?;
        Ok(self.push(value, op))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip_with("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip_with("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip_with("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// Elementwise minimum; ties send the gradient to `a`.
    pub fn minimum(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip_with("minimum", a, b, f64::min, Op::Minimum(a, b))
    }

    pub fn scale(&mut self, x: NodeId, factor: f64) -> NodeId {
        let value = self.value(x).map(|v| v * factor);
        self.push(value, Op::Scale(x, factor))
    }

    pub fn activate(&mut self, x: NodeId, act: Activation) -> NodeId {
        let value = self.value(x).map(|v| act.apply(v));
        self.push(value, Op::Activate(x, act))
    }

    pub fn exp(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(f64::exp);
        self.push(value, Op::Exp(x))
    }

    pub fn square(&mut self, x: NodeId) -> NodeId {
        let value = self.value(x).map(|v| v * v);
        self.push(value, Op::Square(x))
    }

    pub fn clamp(&mut self, x: NodeId, lo: f64, hi: f64) -> NodeId {
        let value = self.value(x).map(|v| v.clamp(lo, hi));
        self.push(value, Op::Clamp(x, lo, hi))
    }

    /// Row-wise log-softmax over the last dimension of a 2-D array.
    pub fn log_softmax(&mut self, x: NodeId) -> Result<NodeId> {
        let (n, m) = self.value(x).dims2("log_softmax")?;
        let mut out = Vec::with_capacity(n * m);
        for row in self.value(x).data().chunks(m) {
            out.extend(log_softmax(row));
        }
        Ok(self.push(Array::new(vec![n, m], out)?, Op::LogSoftmax(x)))
    }

    /// Picks `x[i, index[i]]` for each row, giving a length-`n` vector.
    pub fn gather(&mut self, x: NodeId, index: &[usize]) -> Result<NodeId> {
        let (n, m) = self.value(x).dims2("gather")?;
        if index.len() != n {
            return Err(Error::shape("gather index", &[n], &[index.len()]));
        }
        let mut out = Vec::with_capacity(n);
        for (i, &j) in index.iter().enumerate() {
            if j >= m {
                return Err(Error::Index {
                    context: "gather".into(),
                    index: j,
                    size: m,
                });
            }
            out.push(self.value(x).data()[i * m + j]);
        }
        Ok(self.push(Array::vector(out), Op::Gather(x, index.to_vec())))
    }

    pub fn sum_rows(&mut self, x: NodeId) -> Result<NodeId> {
        let (_, m) = self.value(x).dims2("sum_rows")?;
        let out = self.value(x).data().chunks(m).map(|r| r.iter().sum()).collect();
        Ok(self.push(Array::vector(out), Op::SumRows(x)))
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let value = Array::scalar(self.value(x).sum());
        self.push(value, Op::Sum(x))
    }

    pub fn mean(&mut self, x: NodeId) -> Result<NodeId> {
        let v = self.value(x);
        if v.is_empty() {
            return Err(Error::Contract("mean of an empty array".into()));
        }
        let value = Array::scalar(v.sum() / v.len() as f64);
        Ok(self.push(value, Op::Mean(x)))
    }

    /// Gradient of the scalar node `loss` with respect to every leaf bound to
    /// `params`. Parameters the loss does not reach get exact zeros.
    pub fn backward(&self, loss: NodeId, params: &ParamSet) -> Result<Gradients> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(vec![1.0]);
        let mut out = Gradients::zeros_like(params);

        for idx in (0..=loss.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            let y = node.value.data();
            match &node.op {
                Op::Leaf { param } => {
                    if let Some(name) = param {
                        let slot = params.index_of(name).ok_or_else(|| {
                            Error::Contract(format!("leaf `{name}` not in the parameter set"))
                        })?;
                        for (o, gv) in out.grads[slot].data_mut().iter_mut().zip(&g) {
                            *o += gv;
                        }
                    }
                }
                Op::MatMul(a, b) => {
                    let (n, k) = self.value(*a).dims2("matmul")?;
                    let m = self.value(*b).shape()[1];
                    let av = self.value(*a).data();
                    let bv = self.value(*b).data();
                    // dA = G · Bᵀ
                    let mut ga = vec![0.0; n * k];
                    for i in 0..n {
                        for p in 0..k {
                            let mut s = 0.0;
                            for j in 0..m {
                                s += g[i * m + j] * bv[p * m + j];
                            }
                            ga[i * k + p] = s;
                        }
                    }
                    // dB = Aᵀ · G
                    let mut gb = vec![0.0; k * m];
                    for i in 0..n {
                        for p in 0..k {
                            let a_ip = av[i * k + p];
                            if a_ip == 0.0 {
                                continue;
                            }
                            let row = &mut gb[p * m..(p + 1) * m];
                            for (r, gv) in row.iter_mut().zip(&g[i * m..(i + 1) * m]) {
                                *r += a_ip * gv;
                            }
                        }
                    }
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *b, gb);
                }
                Op::AddBias(x, b) => {
                    let m = self.value(*b).len();
                    let mut gb = vec![0.0; m];
                    for row in g.chunks(m) {
                        for (o, gv) in gb.iter_mut().zip(row) {
                            *o += gv;
                        }
                    }
                    accumulate(&mut adj, *b, gb);
                    accumulate(&mut adj, *x, g);
                }
                Op::Add(a, b) => {
                    accumulate(&mut adj, *a, g.clone());
                    accumulate(&mut adj, *b, g);
                }
                Op::Sub(a, b) => {
                    let neg = g.iter().map(|v| -v).collect();
                    accumulate(&mut adj, *a, g);
                    accumulate(&mut adj, *b, neg);
                }
                Op::Mul(a, b) => {
                    let av = self.value(*a).data();
                    let bv = self.value(*b).data();
                    let ga = g.iter().zip(bv).map(|(gv, x)| gv * x).collect();
                    let gb = g.iter().zip(av).map(|(gv, x)| gv * x).collect();
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *b, gb);
                }
                Op::Scale(x, f) => {
                    accumulate(&mut adj, *x, g.iter().map(|v| v * f).collect());
                }
                Op::Activate(x, act) => {
                    let xv = self.value(*x).data();
                    let gx = g
                        .iter()
                        .zip(xv.iter().zip(y))
                        .map(|(gv, (&xi, &yi))| gv * act.derivative(xi, yi))
                        .collect();
                    accumulate(&mut adj, *x, gx);
                }
                Op::Exp(x) => {
                    accumulate(&mut adj, *x, g.iter().zip(y).map(|(gv, yi)| gv * yi).collect());
                }
                Op::Square(x) => {
                    let xv = self.value(*x).data();
                    accumulate(&mut adj, *x, g.iter().zip(xv).map(|(gv, xi)| 2.0 * gv * xi).collect());
                }
                Op::Clamp(x, lo, hi) => {
                    let xv = self.value(*x).data();
                    let gx = g
                        .iter()
                        .zip(xv)
                        .map(|(gv, &xi)| if xi >= *lo && xi <= *hi { *gv } else { 0.0 })
                        .collect();
                    accumulate(&mut adj, *x, gx);
                }
                Op::Minimum(a, b) => {
                    let av = self.value(*a).data();
                    let bv = self.value(*b).data();
                    let mut ga = vec![0.0; g.len()];
                    let mut gb = vec![0.0; g.len()];
                    for i in 0..g.len() {
                        if av[i] <= bv[i] {
                            ga[i] = g[i];
                        } else {
                            gb[i] = g[i];
                        }
                    }
                    accumulate(&mut adj, *a, ga);
                    accumulate(&mut adj, *b, gb);
                }
                Op::LogSoftmax(x) => {
                    // d/dx_j = g_j − softmax_j · Σ g
                    let m = node.value.shape()[1];
                    let mut gx = Vec::with_capacity(g.len());
                    for (grow, yrow) in g.chunks(m).zip(y.chunks(m)) {
                        let total: f64 = grow.iter().sum();
                        gx.extend(grow.iter().zip(yrow).map(|(gv, ly)| gv - ly.exp() * total));
                    }
                    accumulate(&mut adj, *x, gx);
                }
                Op::Gather(x, index) => {
                    let (n, m) = self.value(*x).dims2("gather")?;
                    let mut gx = vec![0.0; n * m];
                    for (i, &j) in index.iter().enumerate() {
                        gx[i * m + j] = g[i];
                    }
                    accumulate(&mut adj, *x, gx);
                }
                Op::SumRows(x) => {
                    let m = self.value(*x).shape()[1];
                    let gx = g.iter().flat_map(|&gv| std::iter::repeat_n(gv, m)).collect();
                    accumulate(&mut adj, *x, gx);
                }
                Op::Sum(x) => {
                    accumulate(&mut adj, *x, vec![g[0]; self.value(*x).len()]);
                }
                Op::Mean(x) => {
                    let n = self.value(*x).len();
                    accumulate(&mut adj, *x, vec![g[0] / n as f64; n]);
                }
            }
        }
        Ok(out)
    }
}

fn accumulate(adj: &mut [Option<Vec<f64>>], id: NodeId, g: Vec<f64>) {
    match &mut adj[id.0] {
        Some(existing) => {
            for (e, v) in existing.iter_mut().zip(&g) {
                *e += v;
            }
        }
        slot @ None => *slot = Some(g),
    }
}

pub(crate) fn matmul(a: &[f64], b: &[f64], n: usize, k: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        let orow = &mut out[i * m..(i + 1) * m];
        for p in 0..k {
            let a_ip = a[i * k + p];
            if a_ip == 0.0 {
                continue;
            }
            for (o, bv) in orow.iter_mut().zip(&b[p * m..(p + 1) * m]) {
                *o += a_ip * bv;
            }
        }
    }
    out
}

/// Log-softmax of one row, stabilised by subtracting the row maximum.
pub fn log_softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    row.iter().map(|v| v - lse).collect()
}
