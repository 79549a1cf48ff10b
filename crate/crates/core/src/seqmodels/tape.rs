//! Reverse-mode autodiff over 2-D f64 arrays.
//!
//! A [`Tape`] records every operation; [`Tape::backward`] walks the record
//! once in reverse. Values are matrices throughout; a vector is a 1 x N
//! matrix and a scalar is 1 x 1. Gradients are only propagated into
//! subgraphs that contain trainable leaves, and every analytic backward
//! rule here is covered by central-difference checks in the gradcheck
//! tests.

use ndarray::{s, Array2, Axis};

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    /// (T x M) + broadcast (1 x M)
    AddRowBroadcast(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    SoftmaxRows(Var),
    Transpose(Var),
    ConcatCols(Var, Var),
    SliceCols(Var, usize),
    Row(Var, usize),
    StackRows(Vec<Var>),
    MeanRows(Var),
    MeanAll(Var),
    StopGrad,
    Conv1d {
        x: Var,
        w: Var,
        b: Var,
        width: usize,
        stride: usize,
        pad_left: usize,
        /// im2col matrix captured at forward time, (t_out x width*c_in).
        cols: Array2<f64>,
    },
    /// Mean over rows of -sum_c target * ln(softmax(logits)); targets constant.
    SoftmaxXentRows { logits: Var, targets: Array2<f64> },
    /// Mean over rows of -sum_c target * ln(max(pred, floor)); targets constant.
    XentRows { pred: Var, targets: Array2<f64>, floor: f64 },
    /// Mean over elements of (pred - target)^2; targets constant.
    Mse { pred: Var, targets: Array2<f64> },
    /// Binary cross-entropy from a 1x1 logit against a constant target.
    BceLogit { logit: Var, target: f64 },
}

struct Node {
    value: Array2<f64>,
    op: Op,
    requires_grad: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Per-node gradients produced by [`Tape::backward`].
pub struct Grads {
    grads: Vec<Option<Array2<f64>>>,
}

impl Grads {
    /// Gradient of the loss w.r.t. `v`; zero-shaped nodes that never
    /// received gradient return None.
    pub fn get(&self, v: Var) -> Option<&Array2<f64>> {
        self.grads[v.0].as_ref()
    }
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

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    /// Scalar readout of a 1x1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        debug_assert_eq!(self.nodes[v.0].value.dim(), (1, 1));
        self.nodes[v.0].value[[0, 0]]
    }

    fn push(&mut self, value: Array2<f64>, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Trainable input.
    pub fn param(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Constant input; no gradient flows into it.
    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(self.value(b));
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::MatMul(a, b), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) + self.value(b);
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::Add(a, b), rg)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) - self.value(b);
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::Sub(a, b), rg)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) * self.value(b);
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::Mul(a, b), rg)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a) * c;
        let rg = self.rg(a);
        self.push(value, Op::Scale(a, c), rg)
    }

    /// `a` is T x M, `bias` is 1 x M broadcast over rows.
    pub fn add_row_broadcast(&mut self, a: Var, bias: Var) -> Var {
        let value = self.value(a) + &self.value(bias).row(0);
        let rg = self.rg(a) || self.rg(bias);
        self.push(value, Op::AddRowBroadcast(a, bias), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(sigmoid);
        let rg = self.rg(a);
        self.push(value, Op::Sigmoid(a), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(f64::tanh);
        let rg = self.rg(a);
        self.push(value, Op::Tanh(a), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| x.max(0.0));
        let rg = self.rg(a);
        self.push(value, Op::Relu(a), rg)
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut value = x.clone();
        for mut row in value.rows_mut() {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|v| (v - max).exp());
            let sum: f64 = row.sum();
            row.mapv_inplace(|v| v / sum);
        }
        let rg = self.rg(a);
        self.push(value, Op::SoftmaxRows(a), rg)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).t().to_owned();
        let rg = self.rg(a);
        self.push(value, Op::Transpose(a), rg)
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        debug_assert_eq!(va.nrows(), vb.nrows());
        let mut value = Array2::zeros((va.nrows(), va.ncols() + vb.ncols()));
        value.slice_mut(s![.., ..va.ncols()]).assign(va);
        value.slice_mut(s![.., va.ncols()..]).assign(vb);
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::ConcatCols(a, b), rg)
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let value = self.value(a).slice(s![.., start..start + len]).to_owned();
        let rg = self.rg(a);
        self.push(value, Op::SliceCols(a, start), rg)
    }

    /// Row `t` as a 1 x M node.
    pub fn row(&mut self, a: Var, t: usize) -> Var {
        let value = self.value(a).row(t).to_owned().insert_axis(Axis(0));
        let rg = self.rg(a);
        self.push(value, Op::Row(a, t), rg)
    }

    /// Stacks 1 x M rows into a T x M node.
    pub fn stack_rows(&mut self, rows: Vec<Var>) -> Var {
        assert!(!rows.is_empty());
        let m = self.value(rows[0]).ncols();
        let mut value = Array2::zeros((rows.len(), m));
        for (i, &r) in rows.iter().enumerate() {
            value.row_mut(i).assign(&self.value(r).row(0));
        }
        let rg = rows.iter().any(|&r| self.rg(r));
        self.push(value, Op::StackRows(rows), rg)
    }

    /// Mean over rows: T x M -> 1 x M.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let value = (v.sum_axis(Axis(0)) / v.nrows() as f64).insert_axis(Axis(0));
        let rg = self.rg(a);
        self.push(value, Op::MeanRows(a), rg)
    }

    /// Mean over all elements: -> 1 x 1.
    pub fn mean_all(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let value = Array2::from_elem((1, 1), v.mean().unwrap_or(0.0));
        let rg = self.rg(a);
        self.push(value, Op::MeanAll(a), rg)
    }

    /// Identity value, but gradient stops here.
    pub fn stop_grad(&mut self, a: Var) -> Var {
        let value = self.value(a).clone();
        self.push(value, Op::StopGrad, false)
    }

    /// 1-D convolution over time. `x` is T x C_in, `w` is (width*C_in) x
    /// C_out, `b` is 1 x C_out. Output length is ceil(T / stride) with
    /// zero padding split left/right ("same"-style).
    pub fn conv1d(&mut self, x: Var, w: Var, b: Var, width: usize, stride: usize) -> Var {
        let xv = self.value(x);
        let (t_in, c_in) = xv.dim();
        let t_out = t_in.div_ceil(stride);
        let pad_total = ((t_out - 1) * stride + width).saturating_sub(t_in);
        let pad_left = pad_total / 2;

        let mut cols = Array2::zeros((t_out, width * c_in));
        for r in 0..t_out {
            for k in 0..width {
                let src = (r * stride + k) as isize - pad_left as isize;
                if src >= 0 && (src as usize) < t_in {
                    cols.slice_mut(s![r, k * c_in..(k + 1) * c_in])
                        .assign(&xv.row(src as usize));
                }
            }
        }
        let value = cols.dot(self.value(w)) + &self.value(b).row(0);
        let rg = self.rg(x) || self.rg(w) || self.rg(b);
        self.push(value, Op::Conv1d { x, w, b, width, stride, pad_left, cols }, rg)
    }

    /// Mean per-frame cross-entropy of row-softmaxed `logits` against
    /// constant target rows.
    pub fn softmax_xent_rows(&mut self, logits: Var, targets: Array2<f64>) -> Var {
        let x = self.value(logits);
        debug_assert_eq!(x.dim(), targets.dim());
        let mut total = 0.0;
        for (row, trow) in x.rows().into_iter().zip(targets.rows()) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let logsum = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
            total -= row
                .iter()
                .zip(trow.iter())
                .map(|(&l, &t)| t * (l - logsum))
                .sum::<f64>();
        }
        let value = Array2::from_elem((1, 1), total / x.nrows() as f64);
        let rg = self.rg(logits);
        self.push(value, Op::SoftmaxXentRows { logits, targets }, rg)
    }

    /// Mean per-frame cross-entropy of probability rows against constant
    /// target rows, with a probability floor inside the log.
    pub fn xent_rows(&mut self, pred: Var, targets: Array2<f64>, floor: f64) -> Var {
        let p = self.value(pred);
        debug_assert_eq!(p.dim(), targets.dim());
        let mut total = 0.0;
        for (prow, trow) in p.rows().into_iter().zip(targets.rows()) {
            total -= prow
                .iter()
                .zip(trow.iter())
                .map(|(&p, &t)| t * p.max(floor).ln())
                .sum::<f64>();
        }
        let value = Array2::from_elem((1, 1), total / p.nrows() as f64);
        let rg = self.rg(pred);
        self.push(value, Op::XentRows { pred, targets, floor }, rg)
    }

    /// Mean squared error against constant targets.
    pub fn mse(&mut self, pred: Var, targets: Array2<f64>) -> Var {
        let p = self.value(pred);
        debug_assert_eq!(p.dim(), targets.dim());
        let n = (p.nrows() * p.ncols()) as f64;
        let total: f64 = p.iter().zip(targets.iter()).map(|(&a, &b)| (a - b) * (a - b)).sum();
        let value = Array2::from_elem((1, 1), total / n);
        let rg = self.rg(pred);
        self.push(value, Op::Mse { pred, targets }, rg)
    }

    /// Numerically stable BCE from a 1x1 logit.
    pub fn bce_logit(&mut self, logit: Var, target: f64) -> Var {
        let z = self.scalar(logit);
        let loss = z.max(0.0) - z * target + (-z.abs()).exp().ln_1p();
        let rg = self.rg(logit);
        self.push(Array2::from_elem((1, 1), loss), Op::BceLogit { logit, target }, rg)
    }

    /// Reverse pass from a scalar loss node.
    pub fn backward(&mut self, loss: Var) -> Grads {
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Array2::from_elem((1, 1), 1.0));

        for id in (0..=loss.0).rev() {
            let g = match grads[id].take() {
                Some(g) => g,
                None => continue,
            };
            if !self.nodes[id].requires_grad {
                continue;
            }
            match &self.nodes[id].op {
                Op::Leaf | Op::StopGrad => {
                    // Leaves keep their gradient; StopGrad never gets one
                    // because it does not require grad.
                    grads[id] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let (a, b) = (*a, *b);
                    if self.rg(a) {
                        let d = g.dot(&self.value(b).t());
                        acc(&mut grads, a.0, d);
                    }
                    if self.rg(b) {
                        let d = self.value(a).t().dot(&g);
                        acc(&mut grads, b.0, d);
                    }
                }
                Op::Add(a, b) => {
                    let (a, b) = (*a, *b);
                    if self.rg(a) {
                        acc(&mut grads, a.0, g.clone());
                    }
                    if self.rg(b) {
                        acc(&mut grads, b.0, g);
                    }
                }
                Op::Sub(a, b) => {
                    let (a, b) = (*a, *b);
                    if self.rg(a) {
                        acc(&mut grads, a.0, g.clone());
                    }
                    if self.rg(b) {
                        acc(&mut grads, b.0, -&g);
                    }
                }
                Op::Mul(a, b) => {
                    let (a, b) = (*a, *b);
                    if self.rg(a) {
                        let d = &g * self.value(b);
                        acc(&mut grads, a.0, d);
                    }
                    if self.rg(b) {
                        let d = &g * self.value(a);
                        acc(&mut grads, b.0, d);
                    }
                }
                Op::Scale(a, c) => {
                    let (a, c) = (*a, *c);
                    if self.rg(a) {
                        acc(&mut grads, a.0, &g * c);
                    }
                }
                Op::AddRowBroadcast(a, bias) => {
                    let (a, bias) = (*a, *bias);
                    if self.rg(a) {
                        acc(&mut grads, a.0, g.clone());
                    }
                    if self.rg(bias) {
                        let d = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                        acc(&mut grads, bias.0, d);
                    }
                }
                Op::Sigmoid(a) => {
                    let a = *a;
                    if self.rg(a) {
                        let y = &self.nodes[id].value;
                        let d = &g * &(y * &(1.0 - y));
                        acc(&mut grads, a.0, d);
                    }
                }
                Op::Tanh(a) => {
                    let a = *a;
                    if self.rg(a) {
                        let y = &self.nodes[id].value;
                        let d = &g * &(1.0 - &(y * y));
                        acc(&mut grads, a.0, d);
                    }
                }
                Op::Relu(a) => {
                    let a = *a;
                    if self.rg(a) {
                        let y = &self.nodes[id].value;
                        let mask = y.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
                        acc(&mut grads, a.0, &g * &mask);
                    }
                }
                Op::SoftmaxRows(a) => {
                    let a = *a;
                    if self.rg(a) {
                        let y = &self.nodes[id].value;
                        let mut d = Array2::zeros(y.dim());
                        for ((grow, yrow), mut drow) in
                            g.rows().into_iter().zip(y.rows()).zip(d.rows_mut())
                        {
                            let dot: f64 = grow.iter().zip(yrow.iter()).map(|(&gi, &yi)| gi * yi).sum();
                            for ((di, &gi), &yi) in drow.iter_mut().zip(grow.iter()).zip(yrow.iter()) {
                                *di = yi * (gi - dot);
                            }
                        }
                        acc(&mut grads, a.0, d);
                    }
                }
                Op::Transpose(a) => {
                    let a = *a;
                    if self.rg(a) {
                        acc(&mut grads, a.0, g.t().to_owned());
                    }
                }
                Op::ConcatCols(a, b) => {
                    let (a, b) = (*a, *b);
                    let na = self.value(a).ncols();
                    if self.rg(a) {
                        acc(&mut grads, a.0, g.slice(s![.., ..na]).to_owned());
                    }
                    if self.rg(b) {
                        acc(&mut grads, b.0, g.slice(s![.., na..]).to_owned());
                    }
                }
                Op::SliceCols(a, start) => {
                    let (a, start) = (*a, *start);
                    if self.rg(a) {
                        let mut d = Array2::zeros(self.value(a).dim());
                        d.slice_mut(s![.., start..start + g.ncols()]).assign(&g);
                        acc(&mut grads, a.0, d);
                    }
                }
                Op::Row(a, t) => {
                    let (a, t) = (*a, *t);
                    if self.rg(a) {
                        let mut d = Array2::zeros(self.value(a).dim());
                        d.row_mut(t).assign(&g.row(0));
                        acc(&mut grads, a.0, d);
                    }
                }
                Op::StackRows(rows) => {
                    let rows = rows.clone();
                    for (i, r) in rows.into_iter().enumerate() {
                        if self.rg(r) {
                            let d = g.row(i).to_owned().insert_axis(Axis(0));
                            acc(&mut grads, r.0, d);
                        }
                    }
                }
                Op::MeanRows(a) => {
                    let a = *a;
                    if self.rg(a) {
                        let t = self.value(a).nrows();
                        let mut d = Array2::zeros(self.value(a).dim());
                        for mut row in d.rows_mut() {
                            row.assign(&(&g.row(0) / t as f64));
                        }
                        acc(&mut grads, a.0, d);
                    }
                }
                Op::MeanAll(a) => {
                    let a = *a;
                    if self.rg(a) {
                        let dim = self.value(a).dim();
                        let n = (dim.0 * dim.1) as f64;
                        let d = Array2::from_elem(dim, g[[0, 0]] / n);
                        acc(&mut grads, a.0, d);
                    }
                }
                Op::Conv1d { x, w, b, width, stride, pad_left, cols } => {
                    let (x, w, b) = (*x, *w, *b);
                    let (width, stride, pad_left) = (*width, *stride, *pad_left);
                    let cols = cols.clone();
                    if self.rg(w) {
                        let d = cols.t().dot(&g);
                        acc(&mut grads, w.0, d);
                    }
                    if self.rg(b) {
                        let d = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                        acc(&mut grads, b.0, d);
                    }
                    if self.rg(x) {
                        let dcols = g.dot(&self.value(w).t());
                        let (t_in, c_in) = self.value(x).dim();
                        let mut d = Array2::zeros((t_in, c_in));
                        for r in 0..dcols.nrows() {
                            for k in 0..width {
                                let src = (r * stride + k) as isize - pad_left as isize;
                                if src >= 0 && (src as usize) < t_in {
                                    let mut drow = d.row_mut(src as usize);
                                    drow += &dcols.slice(s![r, k * c_in..(k + 1) * c_in]);
                                }
                            }
                        }
                        acc(&mut grads, x.0, d);
                    }
                }
                Op::SoftmaxXentRows { logits, targets } => {
                    let logits = *logits;
                    if self.rg(logits) {
                        let targets = targets.clone();
                        let x = self.value(logits);
                        let t_rows = x.nrows() as f64;
                        let mut d = Array2::zeros(x.dim());
                        for (xrow, mut drow) in x.rows().into_iter().zip(d.rows_mut()) {
                            let max = xrow.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                            let exps: Vec<f64> = xrow.iter().map(|v| (v - max).exp()).collect();
                            let sum: f64 = exps.iter().sum();
                            for (di, e) in drow.iter_mut().zip(exps.iter()) {
                                *di = e / sum;
                            }
                        }
                        d -= &targets;
                        let d = d * (g[[0, 0]] / t_rows);
                        acc(&mut grads, logits.0, d);
                    }
                }
                Op::XentRows { pred, targets, floor } => {
                    let (pred, floor) = (*pred, *floor);
                    if self.rg(pred) {
                        let targets = targets.clone();
                        let p = self.value(pred);
                        let t_rows = p.nrows() as f64;
                        let scale = g[[0, 0]] / t_rows;
                        let mut d = Array2::zeros(p.dim());
                        for ((prow, trow), mut drow) in
                            p.rows().into_iter().zip(targets.rows()).zip(d.rows_mut())
                        {
                            for ((di, &pi), &ti) in drow.iter_mut().zip(prow.iter()).zip(trow.iter()) {
                                *di = if pi > floor { -ti / pi * scale } else { 0.0 };
                            }
                        }
                        acc(&mut grads, pred.0, d);
                    }
                }
                Op::Mse { pred, targets } => {
                    let pred = *pred;
                    if self.rg(pred) {
                        let p = self.value(pred);
                        let n = (p.nrows() * p.ncols()) as f64;
                        let d = (p - targets) * (2.0 * g[[0, 0]] / n);
                        acc(&mut grads, pred.0, d);
                    }
                }
                Op::BceLogit { logit, target } => {
                    let (logit, target) = (*logit, *target);
                    if self.rg(logit) {
                        let z = self.scalar(logit);
                        let d = Array2::from_elem((1, 1), (sigmoid(z) - target) * g[[0, 0]]);
                        acc(&mut grads, logit.0, d);
                    }
                }
            }
        }
        Grads { grads }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn acc(grads: &mut [Option<Array2<f64>>], id: usize, delta: Array2<f64>) {
    match &mut grads[id] {
        Some(g) => *g += &delta,
        slot @ None => *slot = Some(delta),
    }
}
