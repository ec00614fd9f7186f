//! Tape-based reverse-mode automatic differentiation over dense matrices.
//!
//! Every primitive appends one node to the [`Tape`]; nodes are therefore in
//! topological order by construction and `backward` is a single reverse
//! sweep. The primitive set is closed: it covers exactly what the two graph
//! encoders and the link-prediction loss need.
//!
//! ```
//! use milp_isa::autodiff::Tape;
//! use milp_isa::tensor::Matrix;
//!
//! let mut tape = Tape::new();
//! let w = tape.param(Matrix::scalar(3.0));
//! let y = tape.mul(w, w).unwrap();
//! let grads = tape.backward(y).unwrap();
//! assert_eq!(grads.get(&tape, w)[(0, 0)], 6.0);
//! ```

use std::rc::Rc;

use thiserror::Error;

use crate::tensor::Matrix;

#[derive(Debug, Error, PartialEq)]
pub enum AutodiffError {
    #[error("{op}: shape mismatch ({detail})")]
    Shape { op: &'static str, detail: String },
    #[error("{op}: index {index} out of range for {len} rows")]
    Index { op: &'static str, index: usize, len: usize },
    #[error("backward needs a 1x1 loss, got {rows}x{cols}")]
    NotScalar { rows: usize, cols: usize },
    #[error("function value is not finite: {0}")]
    NonFinite(f64),
}

type Result<T> = std::result::Result<T, AutodiffError>;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Tensor(usize);

impl Tensor {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Tensor, Tensor),
    Add(Tensor, Tensor),
    Mul(Tensor, Tensor),
    Scale(Tensor, f64),
    Relu(Tensor),
    LeakyRelu(Tensor, f64),
    Tanh(Tensor),
    Sigmoid(Tensor),
    ConcatCols(Vec<Tensor>),
    GatherRows(Tensor, Rc<[usize]>),
    SegmentSum(Tensor, Rc<[usize]>),
    SegmentSoftmax(Tensor, Rc<[usize]>),
    RowDot(Tensor, Tensor),
    Mean(Tensor),
    BceWithLogits(Tensor, Rc<[f64]>),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn shape_err(op: &'static str, detail: String) -> AutodiffError {
    AutodiffError::Shape { op, detail }
}

fn check_indices(op: &'static str, indices: &[usize], len: usize) -> Result<()> {
    match indices.iter().find(|&&i| i >= len) {
        Some(&index) => Err(AutodiffError::Index { op, index, len }),
        None => Ok(()),
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

/// Per-sample stable binary cross-entropy on a logit.
/// Mean taken about the first element, so a constant sequence averages
/// to exactly that constant.
pub fn shifted_mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut it = values.into_iter();
    let Some(first) = it.next() else {
        return f64::NAN;
    };
    let (mut dev, mut n) = (0.0, 1usize);
    for v in it {
        dev += v - first;
        n += 1;
    }
    first + dev / n as f64
}

pub fn bce_term(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
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

    pub fn value(&self, t: Tensor) -> &Matrix {
        &self.nodes[t.0].value
    }

    pub fn requires_grad(&self, t: Tensor) -> bool {
        self.nodes[t.0].requires_grad
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Tensor {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Tensor(self.nodes.len() - 1)
    }

    fn any_grad(&self, ts: &[Tensor]) -> bool {
        ts.iter().any(|&t| self.nodes[t.0].requires_grad)
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Matrix) -> Tensor {
        self.push(value, Op::Leaf, true)
    }

    pub fn constant(&mut self, value: Matrix) -> Tensor {
        self.push(value, Op::Leaf, false)
    }

    pub fn matmul(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.cols() != vb.rows() {
            return Err(shape_err("matmul", format!("{:?} x {:?}", va.shape(), vb.shape())));
        }
        let out = va.matmul(vb);
        let g = self.any_grad(&[a, b]);
        Ok(self.push(out, Op::MatMul(a, b), g))
    }

    /// Elementwise sum; `b` may also be a `1 x cols` row bias.
    pub fn add(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        let (va, vb) = (self.value(a), self.value(b));
        let out = if va.shape() == vb.shape() {
            va.zip_map(vb, |x, y| x + y)
        } else if vb.rows() == 1 && vb.cols() == va.cols() {
            let mut out = va.clone();
            let bias = vb.as_slice();
            for i in 0..out.rows() {
                for (o, b) in out.row_mut(i).iter_mut().zip(bias) {
                    *o += b;
                }
            }
            out
        } else {
            return Err(shape_err("add", format!("{:?} + {:?}", va.shape(), vb.shape())));
        };
        let g = self.any_grad(&[a, b]);
        Ok(self.push(out, Op::Add(a, b), g))
    }

    pub fn mul(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(shape_err("mul", format!("{:?} * {:?}", va.shape(), vb.shape())));
        }
        let out = va.zip_map(vb, |x, y| x * y);
        let g = self.any_grad(&[a, b]);
        Ok(self.push(out, Op::Mul(a, b), g))
    }

    /// Multiplies by a constant.
    pub fn scale(&mut self, a: Tensor, factor: f64) -> Tensor {
        let out = self.value(a).map(|x| x * factor);
        let g = self.any_grad(&[a]);
        self.push(out, Op::Scale(a, factor), g)
    }

    pub fn relu(&mut self, a: Tensor) -> Tensor {
        let out = self.value(a).map(|x| x.max(0.0));
        let g = self.any_grad(&[a]);
        self.push(out, Op::Relu(a), g)
    }

    pub fn leaky_relu(&mut self, a: Tensor, slope: f64) -> Tensor {
        let out = self.value(a).map(|x| if x > 0.0 { x } else { slope * x });
        let g = self.any_grad(&[a]);
        self.push(out, Op::LeakyRelu(a, slope), g)
    }

    pub fn tanh(&mut self, a: Tensor) -> Tensor {
        let out = self.value(a).map(f64::tanh);
        let g = self.any_grad(&[a]);
        self.push(out, Op::Tanh(a), g)
    }

    pub fn sigmoid(&mut self, a: Tensor) -> Tensor {
        let out = self.value(a).map(sigmoid);
        let g = self.any_grad(&[a]);
        self.push(out, Op::Sigmoid(a), g)
    }

    pub fn concat_cols(&mut self, parts: &[Tensor]) -> Result<Tensor> {
        let Some(&first) = parts.first() else {
            return Err(shape_err("concat_cols", "no inputs".into()));
        };
        let rows = self.value(first).rows();
        if let Some(&bad) = parts.iter().find(|&&p| self.value(p).rows() != rows) {
            return Err(shape_err(
                "concat_cols",
                format!("{} rows vs {}", self.value(bad).rows(), rows),
            ));
        }
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Matrix::zeros(rows, cols);
        for i in 0..rows {
            let mut offset = 0;
            for &p in parts {
                let src = self.value(p).row(i);
                out.row_mut(i)[offset..offset + src.len()].copy_from_slice(src);
                offset += src.len();
            }
        }
        let g = self.any_grad(parts);
        Ok(self.push(out, Op::ConcatCols(parts.to_vec()), g))
    }

    /// Row `k` of the output is row `indices[k]` of `a`.
    pub fn gather_rows(&mut self, a: Tensor, indices: Rc<[usize]>) -> Result<Tensor> {
        let va = self.value(a);
        check_indices("gather_rows", &indices, va.rows())?;
        let out = va.select_rows(&indices);
        let g = self.any_grad(&[a]);
        Ok(self.push(out, Op::GatherRows(a, indices), g))
    }

    /// Scatter-add: row `k` of `a` is added into output row `segments[k]`.
    pub fn segment_sum(&mut self, a: Tensor, segments: Rc<[usize]>, n_segments: usize) -> Result<Tensor> {
        let va = self.value(a);
        if segments.len() != va.rows() {
            return Err(shape_err(
                "segment_sum",
                format!("{} segment ids for {} rows", segments.len(), va.rows()),
            ));
        }
        check_indices("segment_sum", &segments, n_segments)?;
        let mut out = Matrix::zeros(n_segments, va.cols());
        for (k, &s) in segments.iter().enumerate() {
            for (o, x) in out.row_mut(s).iter_mut().zip(va.row(k)) {
                *o += x;
            }
        }
        let g = self.any_grad(&[a]);
        Ok(self.push(out, Op::SegmentSum(a, segments), g))
    }

    /// Softmax over the rows sharing a segment id, independently per column.
    pub fn segment_softmax(&mut self, a: Tensor, segments: Rc<[usize]>, n_segments: usize) -> Result<Tensor> {
        let va = self.value(a);
        if segments.len() != va.rows() {
            return Err(shape_err(
                "segment_softmax",
                format!("{} segment ids for {} rows", segments.len(), va.rows()),
            ));
        }
        check_indices("segment_softmax", &segments, n_segments)?;
        let cols = va.cols();
        let mut max = Matrix::filled(n_segments, cols, f64::NEG_INFINITY);
        for (k, &s) in segments.iter().enumerate() {
            for (m, &x) in max.row_mut(s).iter_mut().zip(va.row(k)) {
                *m = m.max(x);
            }
        }
        let mut out = Matrix::zeros(va.rows(), cols);
        let mut denom = Matrix::zeros(n_segments, cols);
        for (k, &s) in segments.iter().enumerate() {
            for c in 0..cols {
                let e = (va[(k, c)] - max[(s, c)]).exp();
                out[(k, c)] = e;
                denom[(s, c)] += e;
            }
        }
        for (k, &s) in segments.iter().enumerate() {
            for c in 0..cols {
                out[(k, c)] /= denom[(s, c)];
            }
        }
        let g = self.any_grad(&[a]);
        Ok(self.push(out, Op::SegmentSoftmax(a, segments), g))
    }

    /// `n x 1` column of row-wise dot products.
    pub fn row_dot(&mut self, a: Tensor, b: Tensor) -> Result<Tensor> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(shape_err("row_dot", format!("{:?} . {:?}", va.shape(), vb.shape())));
        }
        let values: Vec<f64> = va
            .row_iter()
            .zip(vb.row_iter())
            .map(|(x, y)| crate::tensor::dot(x, y))
            .collect();
        let g = self.any_grad(&[a, b]);
        Ok(self.push(Matrix::column(&values), Op::RowDot(a, b), g))
    }

    pub fn mean(&mut self, a: Tensor) -> Result<Tensor> {
        let va = self.value(a);
        if va.is_empty() {
            return Err(shape_err("mean", "empty input".into()));
        }
        let out = Matrix::scalar(shifted_mean(va.as_slice().iter().copied()));
        let g = self.any_grad(&[a]);
        Ok(self.push(out, Op::Mean(a), g))
    }

    /// Mean binary cross-entropy of an `n x 1` logit column against labels.
    pub fn bce_with_logits(&mut self, logits: Tensor, labels: Rc<[f64]>) -> Result<Tensor> {
        let vz = self.value(logits);
        if vz.cols() != 1 || vz.rows() != labels.len() {
            return Err(shape_err(
                "bce_with_logits",
                format!("{:?} logits vs {} labels", vz.shape(), labels.len()),
            ));
        }
        if labels.is_empty() {
            return Err(shape_err("bce_with_logits", "empty input".into()));
        }
        let terms = vz.as_slice().iter().zip(labels.iter()).map(|(&z, &y)| bce_term(z, y));
        let out = Matrix::scalar(shifted_mean(terms));
        let g = self.any_grad(&[logits]);
        Ok(self.push(out, Op::BceWithLogits(logits, labels), g))
    }

    /// Reverse sweep from a `1 x 1` loss.
    pub fn backward(&self, loss: Tensor) -> Result<Gradients> {
        let (rows, cols) = self.value(loss).shape();
        if (rows, cols) != (1, 1) {
            return Err(AutodiffError::NotScalar { rows, cols });
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Matrix::scalar(1.0));

        for id in (0..=loss.0).rev() {
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(upstream) = grads[id].take() else {
                continue;
            };
            self.propagate(node, &upstream, &mut grads);
            grads[id] = Some(upstream);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, node: &Node, up: &Matrix, grads: &mut [Option<Matrix>]) {
        let send = |t: Tensor, g: Matrix, grads: &mut [Option<Matrix>]| {
            if !self.nodes[t.0].requires_grad {
                return;
            }
            match &mut grads[t.0] {
                Some(acc) => acc.add_assign(&g),
                slot => *slot = Some(g),
            }
        };
        let out = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.requires_grad(*a) {
                    send(*a, up.matmul_t(self.value(*b)), grads);
                }
                if self.requires_grad(*b) {
                    send(*b, self.value(*a).t_matmul(up), grads);
                }
            }
            Op::Add(a, b) => {
                send(*a, up.clone(), grads);
                if self.requires_grad(*b) {
                    let vb = self.value(*b);
                    if vb.shape() == up.shape() {
                        send(*b, up.clone(), grads);
                    } else {
                        let mut col_sum = Matrix::zeros(1, up.cols());
                        for row in up.row_iter() {
                            for (s, v) in col_sum.as_mut_slice().iter_mut().zip(row) {
                                *s += v;
                            }
                        }
                        send(*b, col_sum, grads);
                    }
                }
            }
            Op::Mul(a, b) => {
                if self.requires_grad(*a) {
                    send(*a, up.zip_map(self.value(*b), |g, y| g * y), grads);
                }
                if self.requires_grad(*b) {
                    send(*b, up.zip_map(self.value(*a), |g, x| g * x), grads);
                }
            }
            Op::Scale(a, f) => send(*a, up.map(|g| g * f), grads),
            Op::Relu(a) => {
                let g = up.zip_map(self.value(*a), |g, x| if x > 0.0 { g } else { 0.0 });
                send(*a, g, grads);
            }
            Op::LeakyRelu(a, slope) => {
                let g = up.zip_map(self.value(*a), |g, x| if x > 0.0 { g } else { g * slope });
                send(*a, g, grads);
            }
            Op::Tanh(a) => send(*a, up.zip_map(out, |g, y| g * (1.0 - y * y)), grads),
            Op::Sigmoid(a) => send(*a, up.zip_map(out, |g, y| g * y * (1.0 - y)), grads),
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let width = self.value(p).cols();
                    if self.requires_grad(p) {
                        let mut g = Matrix::zeros(up.rows(), width);
                        for i in 0..up.rows() {
                            g.row_mut(i).copy_from_slice(&up.row(i)[offset..offset + width]);
                        }
                        send(p, g, grads);
                    }
                    offset += width;
                }
            }
            Op::GatherRows(a, indices) => {
                let mut g = Matrix::zeros(self.value(*a).rows(), up.cols());
                for (k, &i) in indices.iter().enumerate() {
                    for (d, u) in g.row_mut(i).iter_mut().zip(up.row(k)) {
                        *d += u;
                    }
                }
                send(*a, g, grads);
            }
            Op::SegmentSum(a, segments) => {
                send(*a, up.select_rows(segments), grads);
            }
            Op::SegmentSoftmax(a, segments) => {
                let n_segments = segments.iter().max().map_or(0, |m| m + 1);
                let mut weighted = Matrix::zeros(n_segments, up.cols());
                for (k, &s) in segments.iter().enumerate() {
                    for c in 0..up.cols() {
                        weighted[(s, c)] += out[(k, c)] * up[(k, c)];
                    }
                }
                let mut g = Matrix::zeros(up.rows(), up.cols());
                for (k, &s) in segments.iter().enumerate() {
                    for c in 0..up.cols() {
                        g[(k, c)] = out[(k, c)] * (up[(k, c)] - weighted[(s, c)]);
                    }
                }
                send(*a, g, grads);
            }
            Op::RowDot(a, b) => {
                let scale_rows = |m: &Matrix| {
                    let mut g = m.clone();
                    for i in 0..g.rows() {
                        let u = up[(i, 0)];
                        g.row_mut(i).iter_mut().for_each(|v| *v *= u);
                    }
                    g
                };
                if self.requires_grad(*a) {
                    send(*a, scale_rows(self.value(*b)), grads);
                }
                if self.requires_grad(*b) {
                    send(*b, scale_rows(self.value(*a)), grads);
                }
            }
            Op::Mean(a) => {
                let va = self.value(*a);
                let g = up[(0, 0)] / va.len() as f64;
                send(*a, Matrix::filled(va.rows(), va.cols(), g), grads);
            }
            Op::BceWithLogits(z, labels) => {
                let vz = self.value(*z);
                let n = labels.len() as f64;
                let u = up[(0, 0)];
                let g: Vec<f64> = vz
                    .as_slice()
                    .iter()
                    .zip(labels.iter())
                    .map(|(&z, &y)| u * (sigmoid(z) - y) / n)
                    .collect();
                send(*z, Matrix::column(&g), grads);
            }
        }
    }
}

/// Gradients from one backward sweep.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `t`; zeros when the loss does
    /// not depend on `t`.
    pub fn get(&self, tape: &Tape, t: Tensor) -> Matrix {
        match self.grads.get(t.0) {
            Some(Some(g)) => g.clone(),
            _ => {
                let (r, c) = tape.value(t).shape();
                Matrix::zeros(r, c)
            }
        }
    }
}

/// Compares reverse-mode gradients of a scalar function against central
/// finite differences. Returns the largest
/// `|g_ad - g_fd| / max(1, |g_ad|, |g_fd|)` over all parameter entries.
pub fn finite_difference_check<F>(f: F, params: &[Matrix], epsilon: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Tensor]) -> Result<Tensor>,
{
    let eval = |ps: &[Matrix]| -> Result<f64> {
        let mut tape = Tape::new();
        let handles: Vec<Tensor> = ps.iter().map(|p| tape.param(p.clone())).collect();
        let out = f(&mut tape, &handles)?;
        let v = tape.value(out);
        if v.shape() != (1, 1) {
            return Err(AutodiffError::NotScalar {
                rows: v.rows(),
                cols: v.cols(),
            });
        }
        let v = v[(0, 0)];
        if v.is_finite() {
            Ok(v)
        } else {
            Err(AutodiffError::NonFinite(v))
        }
    };

    let mut tape = Tape::new();
    let handles: Vec<Tensor> = params.iter().map(|p| tape.param(p.clone())).collect();
    let out = f(&mut tape, &handles)?;
    let value = tape.value(out)[(0, 0)];
    if !value.is_finite() {
        return Err(AutodiffError::NonFinite(value));
    }
    let grads = tape.backward(out)?;

    let mut work: Vec<Matrix> = params.to_vec();
    let mut worst: f64 = 0.0;
    for (p, &h) in handles.iter().enumerate() {
        let analytic = grads.get(&tape, h);
        for k in 0..params[p].len() {
            let original = params[p].as_slice()[k];
            work[p].as_mut_slice()[k] = original + epsilon;
            let plus = eval(&work)?;
            work[p].as_mut_slice()[k] = original - epsilon;
            let minus = eval(&work)?;
            work[p].as_mut_slice()[k] = original;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let ad = analytic.as_slice()[k];
            let err = (ad - numeric).abs() / 1f64.max(ad.abs()).max(numeric.abs());
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
