use std::sync::Arc;

use rand::Rng as _;

use crate::matrix::Matrix;
use crate::rng::Rng;
use crate::sparse::SparseMatrix;
use crate::stats::ExactSum;
use crate::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op {
    Leaf,
    MatMul(Var, Var),
    SpMM(Arc<SparseMatrix>, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    SubRow(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Dropout(Var, Vec<f64>),
    Powi(Var, i32),
    RowSoftmax(Var),
    MeanRows(Var),
    Sum(Var),
    Mean(Var),
    SelectRows(Var, Vec<usize>),
    L2Norm(Var),
    SqrtClamped(Var),
    SoftmaxXent {
        logits: Var,
        rows: Vec<usize>,
        labels: Vec<usize>,
        probs: Matrix,
    },
    RbfMean {
        a: Var,
        b: Var,
        inv_sigma_sq: f64,
        kernel: Vec<f64>,
    },
}

struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

/// Records matrix operations for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so the node list is already a
/// topological order and [`Tape::backward`] walks it once in reverse.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every node that required one.
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Matrix> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    /// The gradient, or zeros shaped like the value when nothing flowed back.
    pub fn get_or_zeros(&self, var: Var, tape: &Tape) -> Matrix {
        self.get(var).cloned().unwrap_or_else(|| {
            let (r, c) = tape.value(var).shape();
            Matrix::zeros(r, c)
        })
    }
}

fn shape_err(op: &'static str, a: &Matrix, b: &Matrix) -> Error {
    Error::Shape {
        op,
        lhs: a.shape(),
        rhs: b.shape(),
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

    pub fn value(&self, var: Var) -> &Matrix {
        &self.nodes[var.0].value
    }

    pub fn requires_grad(&self, var: Var) -> bool {
        self.nodes[var.0].requires_grad
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// A leaf that receives a gradient.
    pub fn parameter(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf that does not.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    /// Product of a constant sparse matrix with a recorded dense value.
    pub fn spmm(&mut self, m: Arc<SparseMatrix>, b: Var) -> Result<Var> {
        let out = m.spmm(self.value(b))?;
        let rg = self.rg(&[b]);
        Ok(self.push(out, Op::SpMM(m, b), rg))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(shape_err(op, x, y));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let out = self.value(a).zip_map(self.value(b), |x, y| x * y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    fn broadcast_row(&self, op: &'static str, a: Var, row: Var, sign: f64) -> Result<Matrix> {
        let (x, r) = (self.value(a), self.value(row));
        if r.rows() != 1 || r.cols() != x.cols() {
            return Err(shape_err(op, x, r));
        }
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (o, &v) in out.row_mut(i).iter_mut().zip(r.data()) {
                *o += sign * v;
            }
        }
        Ok(out)
    }

    /// Adds a `1 × c` row to every row of an `n × c` value.
    pub fn add_broadcast(&mut self, a: Var, row: Var) -> Result<Var> {
        let out = self.broadcast_row("add_broadcast", a, row, 1.0)?;
        let rg = self.rg(&[a, row]);
        Ok(self.push(out, Op::AddRow(a, row), rg))
    }

    /// Subtracts a `1 × c` row from every row of an `n × c` value.
    pub fn sub_broadcast(&mut self, a: Var, row: Var) -> Result<Var> {
        let out = self.broadcast_row("sub_broadcast", a, row, -1.0)?;
        let rg = self.rg(&[a, row]);
        Ok(self.push(out, Op::SubRow(a, row), rg))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).map(|x| s * x);
        let rg = self.rg(&[a]);
        self.push(out, Op::Scale(a, s), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0));
        let rg = self.rg(&[a]);
        self.push(out, Op::Relu(a), rg)
    }

    /// Inverted dropout: in training mode each entry is zeroed with
    /// probability `rate` and survivors are scaled by `1 / (1 − rate)`.
    /// Outside training mode, or at rate 0, the input is returned as is.
    pub fn dropout(&mut self, a: Var, rate: f64, rng: &mut Rng, train: bool) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::input(format!("dropout rate {rate} outside [0, 1)")));
        }
        if !train || rate == 0.0 {
            return Ok(a);
        }
        let keep = 1.0 / (1.0 - rate);
        let mask: Vec<f64> = (0..self.value(a).len())
            .map(|_| {
                if rng.random::<f64>() < rate {
                    0.0
                } else {
                    keep
                }
            })
            .collect();
        Ok(self.dropout_with_mask(a, mask))
    }

    /// Dropout with a caller-supplied multiplier per entry.
    pub fn dropout_with_mask(&mut self, a: Var, mask: Vec<f64>) -> Var {
        let x = self.value(a);
        assert_eq!(mask.len(), x.len(), "dropout mask length");
        let data = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let out = Matrix::from_vec(x.rows(), x.cols(), data).expect("same shape");
        let rg = self.rg(&[a]);
        self.push(out, Op::Dropout(a, mask), rg)
    }

    /// Elementwise integer power.
    pub fn powi(&mut self, a: Var, k: i32) -> Var {
        let out = self.value(a).map(|x| x.powi(k));
        let rg = self.rg(&[a]);
        self.push(out, Op::Powi(a, k), rg)
    }

    /// Softmax of each row, stabilized by subtracting the row maximum.
    pub fn row_softmax(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let mut out = x.clone();
        for i in 0..out.rows() {
            softmax_in_place(out.row_mut(i));
        }
        let rg = self.rg(&[a]);
        self.push(out, Op::RowSoftmax(a), rg)
    }

    /// Column means as a `1 × c` row.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.rows() == 0 {
            return Err(Error::input("mean over zero rows"));
        }
        let mut out = Matrix::zeros(1, x.cols());
        for i in 0..x.rows() {
            for (o, &v) in out.data_mut().iter_mut().zip(x.row(i)) {
                *o += v;
            }
        }
        let n = x.rows() as f64;
        out.data_mut().iter_mut().for_each(|v| *v /= n);
        let rg = self.rg(&[a]);
        Ok(self.push(out, Op::MeanRows(a), rg))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Matrix::scalar(self.value(a).data().iter().sum());
        let rg = self.rg(&[a]);
        self.push(out, Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.is_empty() {
            return Err(Error::input("mean of an empty value"));
        }
        let out = Matrix::scalar(x.data().iter().sum::<f64>() / x.len() as f64);
        let rg = self.rg(&[a]);
        Ok(self.push(out, Op::Mean(a), rg))
    }

    pub fn select_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let x = self.value(a);
        if let Some(&r) = rows.iter().find(|&&r| r >= x.rows()) {
            return Err(Error::input(format!(
                "row {r} out of range for {} rows",
                x.rows()
            )));
        }
        let out = x.select_rows(rows);
        let rg = self.rg(&[a]);
        Ok(self.push(out, Op::SelectRows(a, rows.to_vec()), rg))
    }

    /// Euclidean norm of all entries as a `1 × 1` value. The gradient at the
    /// origin is taken to be zero.
    pub fn l2_norm(&mut self, a: Var) -> Var {
        let norm = self
            .value(a)
            .data()
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        let rg = self.rg(&[a]);
        self.push(Matrix::scalar(norm), Op::L2Norm(a), rg)
    }

    /// Elementwise `sqrt(max(x, 0))`, with zero gradient where `x <= 0`.
    pub fn sqrt_clamped(&mut self, a: Var) -> Var {
        let out = self.value(a).map(|x| x.max(0.0).sqrt());
        let rg = self.rg(&[a]);
        self.push(out, Op::SqrtClamped(a), rg)
    }

    /// Mean negative log-softmax of the true class over the listed rows.
    pub fn softmax_cross_entropy(
        &mut self,
        logits: Var,
        labels: &[usize],
        rows: &[usize],
    ) -> Result<Var> {
        if rows.is_empty() {
            return Err(Error::input("cross-entropy over an empty mask"));
        }
        let x = self.value(logits);
        if labels.len() != x.rows() {
            return Err(Error::input(format!(
                "{} labels for {} logit rows",
                labels.len(),
                x.rows()
            )));
        }
        let mut probs = Matrix::zeros(rows.len(), x.cols());
        let mut total = 0.0;
        let mut picked = Vec::with_capacity(rows.len());
        for (k, &r) in rows.iter().enumerate() {
            if r >= x.rows() || labels[r] >= x.cols() {
                return Err(Error::input(format!(
                    "row {r} or its label is out of range"
                )));
            }
            let row = x.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - row[labels[r]];
            let p = probs.row_mut(k);
            p.copy_from_slice(row);
            softmax_in_place(p);
            picked.push(labels[r]);
        }
        let out = Matrix::scalar(total / rows.len() as f64);
        let rg = self.rg(&[logits]);
        Ok(self.push(
            out,
            Op::SoftmaxXent {
                logits,
                rows: rows.to_vec(),
                labels: picked,
                probs,
            },
            rg,
        ))
    }

    /// Mean of the Gaussian kernel `exp(−‖x − y‖² / (2σ²))` over all row
    /// pairs of `a` and `b`, as a `1 × 1` value.
    ///
    /// The sum is correctly rounded, so it does not depend on the order of the
    /// pairs: equal multisets of rows give bitwise-equal results whichever
    /// arguments they are passed as. When `a` and `b` are the same variable
    /// only the upper triangle is evaluated.
    pub fn rbf_kernel_mean(&mut self, a: Var, b: Var, bandwidth: f64) -> Result<Var> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::input(format!(
                "kernel bandwidth {bandwidth} must be positive"
            )));
        }
        let (x, y) = (self.value(a), self.value(b));
        if x.cols() != y.cols() {
            return Err(shape_err("rbf_kernel_mean", x, y));
        }
        if x.rows() == 0 || y.rows() == 0 {
            return Err(Error::input("kernel mean over an empty sample"));
        }
        let inv_sigma_sq = 1.0 / (bandwidth * bandwidth);
        let mut acc = ExactSum::new();
        let kernel;
        if a == b {
            let n = x.rows();
            kernel = upper_kernel(x, inv_sigma_sq);
            for &k in &kernel {
                acc.add(2.0 * k);
            }
            for _ in 0..n {
                acc.add(1.0);
            }
        } else {
            kernel = full_kernel(x, y, inv_sigma_sq);
            for &k in &kernel {
                acc.add(k);
            }
        }
        let count = (x.rows() * y.rows()) as f64;
        let out = Matrix::scalar(acc.value() / count);
        let rg = self.rg(&[a, b]);
        Ok(self.push(
            out,
            Op::RbfMean {
                a,
                b,
                inv_sigma_sq,
                kernel,
            },
            rg,
        ))
    }

    /// Reverse pass from a `1 × 1` value.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let shape = self.value(loss).shape();
        if shape != (1, 1) {
            return Err(Error::input(format!(
                "backward needs a scalar loss, got shape {shape:?}"
            )));
        }
        let mut grads: Vec<Option<Matrix>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Matrix::scalar(1.0));
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, g: &Matrix, grads: &mut [Option<Matrix>]) {
        let mut acc = |v: Var, contribution: Matrix| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&contribution),
                slot @ None => *slot = Some(contribution),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (x, y) = (self.value(*a), self.value(*b));
                if self.nodes[a.0].requires_grad {
                    acc(*a, g.matmul_nt(y));
                }
                if self.nodes[b.0].requires_grad {
                    acc(*b, x.matmul_tn(g));
                }
            }
            Op::SpMM(m, b) => acc(*b, m.spmm_transpose(g).expect("shapes checked forward")),
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                let (x, y) = (self.value(*a), self.value(*b));
                acc(*a, g.zip_map(y, |gv, yv| gv * yv));
                acc(*b, g.zip_map(x, |gv, xv| gv * xv));
            }
            Op::AddRow(a, r) | Op::SubRow(a, r) => {
                let sign = if matches!(node.op, Op::AddRow(..)) {
                    1.0
                } else {
                    -1.0
                };
                acc(*a, g.clone());
                let mut col_sums = Matrix::zeros(1, g.cols());
                for i in 0..g.rows() {
                    for (s, &v) in col_sums.data_mut().iter_mut().zip(g.row(i)) {
                        *s += sign * v;
                    }
                }
                acc(*r, col_sums);
            }
            Op::Scale(a, s) => acc(*a, g.map(|v| s * v)),
            Op::Relu(a) => acc(
                *a,
                g.zip_map(self.value(*a), |gv, x| if x > 0.0 { gv } else { 0.0 }),
            ),
            Op::Dropout(a, mask) => {
                let data = g.data().iter().zip(mask).map(|(gv, m)| gv * m).collect();
                acc(
                    *a,
                    Matrix::from_vec(g.rows(), g.cols(), data).expect("same shape"),
                );
            }
            Op::Powi(a, k) => {
                let k = *k;
                acc(
                    *a,
                    g.zip_map(self.value(*a), |gv, x| gv * k as f64 * x.powi(k - 1)),
                );
            }
            Op::RowSoftmax(a) => {
                let y = &node.value;
                let mut out = Matrix::zeros(y.rows(), y.cols());
                for i in 0..y.rows() {
                    let (yr, gr) = (y.row(i), g.row(i));
                    let dot: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                    for ((o, &p), &q) in out.row_mut(i).iter_mut().zip(yr).zip(gr) {
                        *o = p * (q - dot);
                    }
                }
                acc(*a, out);
            }
            Op::MeanRows(a) => {
                let x = self.value(*a);
                let n = x.rows() as f64;
                let mut out = Matrix::zeros(x.rows(), x.cols());
                for i in 0..x.rows() {
                    for (o, &gv) in out.row_mut(i).iter_mut().zip(g.data()) {
                        *o = gv / n;
                    }
                }
                acc(*a, out);
            }
            Op::Sum(a) => {
                let (r, c) = self.value(*a).shape();
                acc(*a, Matrix::filled(r, c, g.item()));
            }
            Op::Mean(a) => {
                let x = self.value(*a);
                acc(
                    *a,
                    Matrix::filled(x.rows(), x.cols(), g.item() / x.len() as f64),
                );
            }
            Op::SelectRows(a, rows) => {
                let (r, c) = self.value(*a).shape();
                let mut out = Matrix::zeros(r, c);
                for (k, &i) in rows.iter().enumerate() {
                    for (o, &gv) in out.row_mut(i).iter_mut().zip(g.row(k)) {
                        *o += gv;
                    }
                }
                acc(*a, out);
            }
            Op::L2Norm(a) => {
                let norm = node.value.item();
                let x = self.value(*a);
                if norm > 0.0 {
                    let s = g.item() / norm;
                    acc(*a, x.map(|v| s * v));
                } else {
                    acc(*a, Matrix::zeros(x.rows(), x.cols()));
                }
            }
            Op::SqrtClamped(a) => {
                let x = self.value(*a);
                let mut out = Matrix::zeros(x.rows(), x.cols());
                for ((o, (&xv, &yv)), &gv) in out
                    .data_mut()
                    .iter_mut()
                    .zip(x.data().iter().zip(node.value.data()))
                    .zip(g.data())
                {
                    if xv > 0.0 {
                        *o = gv / (2.0 * yv);
                    }
                }
                acc(*a, out);
            }
            Op::SoftmaxXent {
                logits,
                rows,
                labels,
                probs,
            } => {
                let x = self.value(*logits);
                let s = g.item() / rows.len() as f64;
                let mut out = Matrix::zeros(x.rows(), x.cols());
                for (k, &r) in rows.iter().enumerate() {
                    let dst = out.row_mut(r);
                    for (o, &p) in dst.iter_mut().zip(probs.row(k)) {
                        *o += s * p;
                    }
                    dst[labels[k]] -= s;
                }
                acc(*logits, out);
            }
            Op::RbfMean {
                a,
                b,
                inv_sigma_sq,
                kernel,
            } => {
                let (x, y) = (self.value(*a), self.value(*b));
                let d = x.cols();
                if a == b {
                    let n = x.rows();
                    let s = 2.0 * g.item() * inv_sigma_sq / (n * n) as f64;
                    let mut gx = Matrix::zeros(n, d);
                    let mut k = 0;
                    for i in 0..n {
                        for j in i + 1..n {
                            let t = s * kernel[k];
                            k += 1;
                            for c in 0..d {
                                let diff = t * (x[(i, c)] - x[(j, c)]);
                                gx[(i, c)] -= diff;
                                gx[(j, c)] += diff;
                            }
                        }
                    }
                    acc(*a, gx);
                } else {
                    let (na, nb) = (x.rows(), y.rows());
                    let s = g.item() * inv_sigma_sq / (na * nb) as f64;
                    let mut gx = Matrix::zeros(na, d);
                    let mut gy = Matrix::zeros(nb, d);
                    for i in 0..na {
                        let xi = x.row(i);
                        for j in 0..nb {
                            let t = s * kernel[i * nb + j];
                            let yj = y.row(j);
                            for c in 0..d {
                                let diff = t * (xi[c] - yj[c]);
                                gx[(i, c)] -= diff;
                                gy[(j, c)] += diff;
                            }
                        }
                    }
                    acc(*a, gx);
                    acc(*b, gy);
                }
            }
        }
    }
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    row.iter_mut().for_each(|v| *v /= total);
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn full_kernel(x: &Matrix, y: &Matrix, inv_sigma_sq: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.rows() * y.rows());
    for i in 0..x.rows() {
        let xi = x.row(i);
        for j in 0..y.rows() {
            out.push((-0.5 * inv_sigma_sq * sq_dist(xi, y.row(j))).exp());
        }
    }
    out
}

/// Kernel values for `i < j`, row by row.
fn upper_kernel(x: &Matrix, inv_sigma_sq: f64) -> Vec<f64> {
    let n = x.rows();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        let xi = x.row(i);
        for j in i + 1..n {
            out.push((-0.5 * inv_sigma_sq * sq_dist(xi, x.row(j))).exp());
        }
    }
    out
}
