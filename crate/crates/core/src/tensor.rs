//! Tape-based reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Graph`] records every operation in append order. Calling
//! [`Graph::backward`] walks the tape once in reverse and leaves the
//! gradient of the loss on every node that depends on a trainable leaf.
//! A graph is single-use: build a new one for every forward pass.

use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("invalid tensor: {0}")]
    Invalid(String),
    #[error("cannot average an empty sequence")]
    EmptySequence,
    #[error("label {index} out of range for {classes} classes")]
    Label { index: usize, classes: usize },
    #[error("coefficient must be finite and non-negative, got {0}")]
    Coefficient(f64),
    #[error("backward needs a scalar loss, got shape {0:?}")]
    Rank(Vec<usize>),
    #[error("graph was already consumed by a backward pass")]
    Reuse,
    #[error("variable belongs to a different graph")]
    ForeignVar,
}

/// Dense row-major array with an optional gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
    grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Self, TensorError> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(TensorError::Invalid(format!(
                "shape {shape:?} must have positive dimensions"
            )));
        }
        let expected: usize = shape.iter().product();
        if expected != values.len() {
            return Err(TensorError::Invalid(format!(
                "shape {shape:?} needs {expected} values, got {}",
                values.len()
            )));
        }
        Ok(Self {
            shape,
            values,
            grad: None,
        })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self, TensorError> {
        let n = shape.iter().product();
        Self::new(shape.to_vec(), vec![0.0; n])
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![1],
            values: vec![value],
            grad: None,
        }
    }

    pub fn vector(values: Vec<f64>) -> Result<Self, TensorError> {
        Self::new(vec![values.len()], values)
    }

    pub fn matrix(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self, TensorError> {
        Self::new(vec![rows, cols], values)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, TensorError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(TensorError::Invalid("ragged rows".into()));
        }
        Self::matrix(rows.len(), cols, rows.concat())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn grad(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    pub fn set_grad(&mut self, grad: Option<Vec<f64>>) -> Result<(), TensorError> {
        if let Some(g) = &grad {
            if g.len() != self.values.len() {
                return Err(TensorError::Invalid(format!(
                    "gradient of length {} for tensor of length {}",
                    g.len(),
                    self.values.len()
                )));
            }
        }
        self.grad = grad;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Row count of a rank-2 tensor (or 1 for a vector).
    pub fn rows(&self) -> usize {
        if self.shape.len() == 2 {
            self.shape[0]
        } else {
            1
        }
    }

    /// Trailing dimension.
    pub fn cols(&self) -> usize {
        *self.shape.last().expect("shape is never empty")
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.cols();
        &self.values[r * c..(r + 1) * c]
    }

    /// The single value of a one-element tensor.
    pub fn item(&self) -> Option<f64> {
        (self.values.len() == 1).then(|| self.values[0])
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Numerically stable softmax of one row of logits.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Handle to a node of a specific [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var {
    graph: u64,
    index: usize,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    AddBias(usize, usize),
    Add(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Tanh(usize),
    MeanRows(usize),
    StackRows(Vec<usize>),
    Sum(usize),
    Nll {
        logits: usize,
        labels: Vec<usize>,
        probs: Vec<f64>,
    },
    GradReverse(usize, f64),
    ScaleGrad(usize, f64),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

static NEXT_GRAPH_ID: AtomicU64 = AtomicU64::new(1);

/// Append-only operation tape.
#[derive(Debug)]
pub struct Graph {
    id: u64,
    nodes: Vec<Node>,
    consumed: bool,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self {
            id: NEXT_GRAPH_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
            consumed: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn check(&self, var: Var) -> Result<usize, TensorError> {
        if var.graph != self.id || var.index >= self.nodes.len() {
            return Err(TensorError::ForeignVar);
        }
        Ok(var.index)
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            graph: self.id,
            index: self.nodes.len() - 1,
        }
    }

    fn node(&self, index: usize) -> &Node {
        &self.nodes[index]
    }

    /// Trainable leaf: receives a gradient on backward.
    pub fn param(&mut self, mut tensor: Tensor) -> Var {
        tensor.grad = None;
        self.push(tensor, Op::Leaf, true)
    }

    /// Constant leaf: no gradient is propagated into it.
    pub fn constant(&mut self, mut tensor: Tensor) -> Var {
        tensor.grad = None;
        self.push(tensor, Op::Leaf, false)
    }

    pub fn value(&self, var: Var) -> Result<&Tensor, TensorError> {
        Ok(&self.nodes[self.check(var)?].value)
    }

    /// Gradient left on `var` by the last backward pass.
    pub fn grad(&self, var: Var) -> Result<Option<&[f64]>, TensorError> {
        Ok(self.nodes[self.check(var)?].value.grad())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ia, ib) = (self.check(a)?, self.check(b)?);
        let (av, bv) = (&self.node(ia).value, &self.node(ib).value);
        if av.shape.len() != 2 || bv.shape.len() != 2 || av.shape[1] != bv.shape[0] {
            return Err(TensorError::Shape {
                op: "matmul",
                left: av.shape.clone(),
                right: bv.shape.clone(),
            });
        }
        let (m, k, n) = (av.shape[0], av.shape[1], bv.shape[1]);
        let out = matmul_raw(&av.values, &bv.values, m, k, n);
        let rg = self.node(ia).requires_grad || self.node(ib).requires_grad;
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMul(ia, ib), rg))
    }

    /// Adds a `[C]` bias to every row of an `[R×C]` matrix.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var, TensorError> {
        let (ix, ib) = (self.check(x)?, self.check(bias)?);
        let (xv, bv) = (&self.node(ix).value, &self.node(ib).value);
        if xv.shape.len() != 2 || bv.shape.len() != 1 || xv.shape[1] != bv.shape[0] {
            return Err(TensorError::Shape {
                op: "add_bias",
                left: xv.shape.clone(),
                right: bv.shape.clone(),
            });
        }
        let c = bv.shape[0];
        let out: Vec<f64> = xv
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| v + bv.values[i % c])
            .collect();
        let shape = xv.shape.clone();
        let rg = self.node(ix).requires_grad || self.node(ib).requires_grad;
        Ok(self.push(Tensor::new(shape, out)?, Op::AddBias(ix, ib), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ia, ib) = self.same_shape("add", a, b)?;
        let (av, bv) = (&self.node(ia).value, &self.node(ib).value);
        let out = av.values.iter().zip(&bv.values).map(|(x, y)| x + y).collect();
        let shape = av.shape.clone();
        let rg = self.node(ia).requires_grad || self.node(ib).requires_grad;
        Ok(self.push(Tensor::new(shape, out)?, Op::Add(ia, ib), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (ia, ib) = self.same_shape("mul", a, b)?;
        let (av, bv) = (&self.node(ia).value, &self.node(ib).value);
        let out = av.values.iter().zip(&bv.values).map(|(x, y)| x * y).collect();
        let shape = av.shape.clone();
        let rg = self.node(ia).requires_grad || self.node(ib).requires_grad;
        Ok(self.push(Tensor::new(shape, out)?, Op::Mul(ia, ib), rg))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(usize, usize), TensorError> {
        let (ia, ib) = (self.check(a)?, self.check(b)?);
        let (sa, sb) = (&self.node(ia).value.shape, &self.node(ib).value.shape);
        if sa != sb {
            return Err(TensorError::Shape {
                op,
                left: sa.clone(),
                right: sb.clone(),
            });
        }
        Ok((ia, ib))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Result<Var, TensorError> {
        let ix = self.check(x)?;
        let xv = &self.node(ix).value;
        let out = xv.values.iter().map(|v| v * factor).collect();
        let shape = xv.shape.clone();
        let rg = self.node(ix).requires_grad;
        Ok(self.push(Tensor::new(shape, out)?, Op::Scale(ix, factor), rg))
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var, TensorError> {
        let ix = self.check(x)?;
        let xv = &self.node(ix).value;
        let out = xv.values.iter().map(|v| v.tanh()).collect();
        let shape = xv.shape.clone();
        let rg = self.node(ix).requires_grad;
        Ok(self.push(Tensor::new(shape, out)?, Op::Tanh(ix), rg))
    }

    /// Average over the time axis: `[T×D] -> [D]`.
    pub fn mean_axis(&mut self, x: Var) -> Result<Var, TensorError> {
        let ix = self.check(x)?;
        let xv = &self.node(ix).value;
        if xv.shape.len() != 2 {
            return Err(TensorError::Shape {
                op: "mean_axis",
                left: xv.shape.clone(),
                right: vec![],
            });
        }
        let (t, d) = (xv.shape[0], xv.shape[1]);
        if t == 0 {
            return Err(TensorError::EmptySequence);
        }
        let mut out = vec![0.0; d];
        for row in xv.values.chunks_exact(d) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        let tf = t as f64;
        out.iter_mut().for_each(|o| *o /= tf);
        let rg = self.node(ix).requires_grad;
        Ok(self.push(Tensor::vector(out)?, Op::MeanRows(ix), rg))
    }

    /// Stacks equal-length vectors into a `[B×D]` matrix.
    pub fn stack_rows(&mut self, rows: &[Var]) -> Result<Var, TensorError> {
        if rows.is_empty() {
            return Err(TensorError::EmptySequence);
        }
        let idx = rows
            .iter()
            .map(|&r| self.check(r))
            .collect::<Result<Vec<_>, _>>()?;
        let first = self.node(idx[0]).value.shape.clone();
        let d = first.iter().product::<usize>();
        let mut values = Vec::with_capacity(d * idx.len());
        let mut rg = false;
        for &i in &idx {
            let n = self.node(i);
            if n.value.len() != d {
                return Err(TensorError::Shape {
                    op: "stack_rows",
                    left: first,
                    right: n.value.shape.clone(),
                });
            }
            values.extend_from_slice(&n.value.values);
            rg |= n.requires_grad;
        }
        let rows_n = idx.len();
        Ok(self.push(Tensor::matrix(rows_n, d, values)?, Op::StackRows(idx), rg))
    }

    pub fn sum(&mut self, x: Var) -> Result<Var, TensorError> {
        let ix = self.check(x)?;
        let total = self.node(ix).value.values.iter().sum();
        let rg = self.node(ix).requires_grad;
        Ok(self.push(Tensor::scalar(total), Op::Sum(ix), rg))
    }

    /// Mean negative log-likelihood of `labels` under `softmax(logits)`.
    pub fn log_softmax_nll(&mut self, logits: Var, labels: &[usize]) -> Result<Var, TensorError> {
        let il = self.check(logits)?;
        let lv = &self.node(il).value;
        if lv.shape.len() != 2 || lv.shape[0] != labels.len() {
            return Err(TensorError::Shape {
                op: "log_softmax_nll",
                left: lv.shape.clone(),
                right: vec![labels.len()],
            });
        }
        let c = lv.shape[1];
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(TensorError::Label {
                index: bad,
                classes: c,
            });
        }
        let mut probs = Vec::with_capacity(lv.len());
        let mut total = 0.0;
        for (row, &label) in lv.values.chunks_exact(c).zip(labels) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum_exp: f64 = row.iter().map(|&l| (l - max).exp()).sum();
            let log_norm = max + sum_exp.ln();
            total += log_norm - row[label];
            probs.extend(row.iter().map(|&l| (l - log_norm).exp()));
        }
        let loss = total / labels.len() as f64;
        let rg = self.node(il).requires_grad;
        let op = Op::Nll {
            logits: il,
            labels: labels.to_vec(),
            probs,
        };
        Ok(self.push(Tensor::scalar(loss), op, rg))
    }

    /// Gradient reversal: identity forward, backward scaled by `-gamma`.
    pub fn grad_reverse(&mut self, x: Var, gamma: f64) -> Result<Var, TensorError> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(TensorError::Coefficient(gamma));
        }
        let ix = self.check(x)?;
        let value = self.node(ix).value.clone();
        let rg = self.node(ix).requires_grad;
        Ok(self.push(value, Op::GradReverse(ix, gamma), rg))
    }

    /// Identity forward, backward scaled by `factor`.
    pub fn scale_grad(&mut self, x: Var, factor: f64) -> Result<Var, TensorError> {
        if !factor.is_finite() {
            return Err(TensorError::Coefficient(factor));
        }
        let ix = self.check(x)?;
        let value = self.node(ix).value.clone();
        let rg = self.node(ix).requires_grad;
        Ok(self.push(value, Op::ScaleGrad(ix, factor), rg))
    }

    /// Reverse sweep from a scalar `loss`. Gradients of trainable leaves are
    /// readable through [`Graph::grad`] afterwards.
    pub fn backward(&mut self, loss: Var) -> Result<(), TensorError> {
        let il = self.check(loss)?;
        if self.consumed {
            return Err(TensorError::Reuse);
        }
        if self.nodes[il].value.len() != 1 {
            return Err(TensorError::Rank(self.nodes[il].value.shape.clone()));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[il] = Some(vec![1.0]);
        for i in (0..=il).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else {
                continue;
            };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        for (node, g) in self.nodes.iter_mut().zip(grads) {
            // Unreached trainable leaves have a zero gradient, not none.
            node.value.grad = match (&node.op, g) {
                (Op::Leaf, None) if node.requires_grad => Some(vec![0.0; node.value.len()]),
                (_, g) => g,
            };
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        let wants = |j: usize| self.nodes[j].requires_grad;
        match &node.op {
            Op::Leaf => {}
            &Op::MatMul(a, b) => {
                let (av, bv) = (&self.nodes[a].value, &self.nodes[b].value);
                let (m, k, n) = (av.shape[0], av.shape[1], bv.shape[1]);
                if wants(a) {
                    // g[m×n] · bᵀ[n×k]
                    let mut ga = vec![0.0; m * k];
                    for r in 0..m {
                        for c in 0..n {
                            let gv = g[r * n + c];
                            for j in 0..k {
                                ga[r * k + j] += gv * bv.values[j * n + c];
                            }
                        }
                    }
                    accumulate(grads, a, ga);
                }
                if wants(b) {
                    // aᵀ[k×m] · g[m×n]
                    let mut gb = vec![0.0; k * n];
                    for r in 0..m {
                        for j in 0..k {
                            let av_rj = av.values[r * k + j];
                            for c in 0..n {
                                gb[j * n + c] += av_rj * g[r * n + c];
                            }
                        }
                    }
                    accumulate(grads, b, gb);
                }
            }
            &Op::AddBias(x, bias) => {
                if wants(x) {
                    accumulate(grads, x, g.to_vec());
                }
                if wants(bias) {
                    let c = self.nodes[bias].value.len();
                    let mut gb = vec![0.0; c];
                    for row in g.chunks_exact(c) {
                        for (o, v) in gb.iter_mut().zip(row) {
                            *o += v;
                        }
                    }
                    accumulate(grads, bias, gb);
                }
            }
            &Op::Add(a, b) => {
                if wants(a) {
                    accumulate(grads, a, g.to_vec());
                }
                if wants(b) {
                    accumulate(grads, b, g.to_vec());
                }
            }
            &Op::Mul(a, b) => {
                let (av, bv) = (&self.nodes[a].value.values, &self.nodes[b].value.values);
                if wants(a) {
                    accumulate(grads, a, g.iter().zip(bv).map(|(g, y)| g * y).collect());
                }
                if wants(b) {
                    accumulate(grads, b, g.iter().zip(av).map(|(g, x)| g * x).collect());
                }
            }
            &Op::Scale(x, factor) | &Op::ScaleGrad(x, factor) => {
                accumulate(grads, x, g.iter().map(|v| factor * v).collect());
            }
            &Op::GradReverse(x, gamma) => {
                if gamma == 0.0 {
                    return;
                }
                let neg = -gamma;
                accumulate(grads, x, g.iter().map(|v| neg * v).collect());
            }
            &Op::Tanh(x) => {
                let y = &node.value.values;
                accumulate(
                    grads,
                    x,
                    g.iter().zip(y).map(|(g, y)| g * (1.0 - y * y)).collect(),
                );
            }
            &Op::MeanRows(x) => {
                let t = self.nodes[x].value.shape[0];
                let tf = t as f64;
                let row: Vec<f64> = g.iter().map(|v| v / tf).collect();
                let mut gx = Vec::with_capacity(t * row.len());
                for _ in 0..t {
                    gx.extend_from_slice(&row);
                }
                accumulate(grads, x, gx);
            }
            Op::StackRows(inputs) => {
                let d = node.value.shape[1];
                for (r, &j) in inputs.iter().enumerate() {
                    if wants(j) {
                        accumulate(grads, j, g[r * d..(r + 1) * d].to_vec());
                    }
                }
            }
            &Op::Sum(x) => {
                let n = self.nodes[x].value.len();
                accumulate(grads, x, vec![g[0]; n]);
            }
            Op::Nll {
                logits,
                labels,
                probs,
            } => {
                let c = self.nodes[*logits].value.shape[1];
                let scale = g[0] / labels.len() as f64;
                let mut gl = probs.clone();
                for (row, &label) in gl.chunks_exact_mut(c).zip(labels) {
                    row[label] -= 1.0;
                    row.iter_mut().for_each(|v| *v *= scale);
                }
                accumulate(grads, *logits, gl);
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], j: usize, contrib: Vec<f64>) {
    match &mut grads[j] {
        Some(existing) => existing
            .iter_mut()
            .zip(contrib)
            .for_each(|(e, c)| *e += c),
        slot @ None => *slot = Some(contrib),
    }
}

fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for r in 0..m {
        let out_row = &mut out[r * n..(r + 1) * n];
        for j in 0..k {
            let a_rj = a[r * k + j];
            let b_row = &b[j * n..(j + 1) * n];
            for (o, bv) in out_row.iter_mut().zip(b_row) {
                *o += a_rj * bv;
            }
        }
    }
    out
}
