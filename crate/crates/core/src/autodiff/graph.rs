use std::collections::HashMap;

use super::matrix::{Mat, Real};
use crate::error::{Error, Result};

/// Handle to a node recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Index of a trainable array inside a parameter store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, Copy)]
enum Unary {
    Relu,
    Tanh,
    Softplus,
    Abs,
    Square,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Unary(Var, Unary),
    /// Adds row `g` of the second operand to every row of segment `g`.
    AddSegRows { x: Var, b: Var, seg: usize },
    /// Multiplies every row of segment `g` by row `g` of the second operand.
    MulSegRows { x: Var, g: Var, seg: usize },
    SegMax { x: Var, argmax: Vec<usize> },
    Normalize { x: Var, seg: usize, inv_std: Vec<f64> },
    SliceCols { x: Var, start: usize },
    ConcatRows(Vec<Var>),
    ConcatSegRows { parts: Vec<Var>, segs: Vec<usize> },
    Chamfer { p: Var, q: Var, seg_p: usize, seg_q: usize, nn_pq: Vec<usize>, nn_qp: Vec<usize> },
    Mean(Var),
    Sum(Var),
}

struct Node<S> {
    value: Mat<S>,
    op: Op,
}

/// Reverse-mode tape over dense matrices.
///
/// Every operation evaluates eagerly and records its inputs. Graphs built
/// with [`Graph::inference`] still evaluate but refuse [`Graph::backward`].
pub struct Graph<S: Real> {
    nodes: Vec<Node<S>>,
    params: HashMap<ParamId, Var>,
    recording: bool,
}

/// Adjoints produced by [`Graph::backward`].
pub struct Gradients<S: Real> {
    nodes: Vec<Option<Mat<S>>>,
    params: HashMap<ParamId, Var>,
}

impl<S: Real> Gradients<S> {
    /// Gradient of a parameter, `None` when the loss never touched it.
    pub fn param(&self, id: ParamId) -> Option<&Mat<S>> {
        self.params.get(&id).and_then(|v| self.nodes[v.0].as_ref())
    }

    pub fn node(&self, v: Var) -> Option<&Mat<S>> {
        self.nodes.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn param_ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        self.params.keys().copied()
    }
}

impl<S: Real> Default for Graph<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Real> Graph<S> {
    /// Graph that records for a later backward pass.
    pub fn new() -> Self {
        Self { nodes: Vec::new(), params: HashMap::new(), recording: true }
    }

    /// Forward-only graph.
    pub fn inference() -> Self {
        Self { nodes: Vec::new(), params: HashMap::new(), recording: false }
    }

    pub fn is_recording(&self) -> bool {
        self.recording
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Mat<S>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Mat<S> {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value.data[0].as_f64()
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// Constant input; gradients stop here.
    pub fn constant(&mut self, value: Mat<S>) -> Var {
        self.push(value, Op::Leaf)
    }

    /// Detached copy of an existing node.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.nodes[v.0].value.clone();
        self.constant(value)
    }

    /// Parameter leaf. Repeated calls with the same id share one node so
    /// all uses accumulate into the same gradient.
    pub fn param(&mut self, id: ParamId, value: &Mat<S>) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push(value.clone(), Op::Param);
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).matmul(self.value(b));
        self.push(value, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(value, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push(value, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(value, Op::Mul(a, b))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let cs = S::from_f64_lossy(c);
        let value = self.value(x).map(|v| v * cs);
        self.push(value, Op::Scale(x, c))
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        let cs = S::from_f64_lossy(c);
        let value = self.value(x).map(|v| v + cs);
        self.push(value, Op::AddScalar(x))
    }

    fn unary(&mut self, x: Var, kind: Unary) -> Var {
        let value = self.value(x).map(|v| match kind {
            Unary::Relu => v.max(S::zero()),
            Unary::Tanh => v.tanh(),
            Unary::Softplus => softplus(v),
            Unary::Abs => v.abs(),
            Unary::Square => v * v,
        });
        self.push(value, Op::Unary(x, kind))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, Unary::Relu)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, Unary::Tanh)
    }

    /// `ln(1 + eˣ)`
    pub fn softplus(&mut self, x: Var) -> Var {
        self.unary(x, Unary::Softplus)
    }

    pub fn abs(&mut self, x: Var) -> Var {
        self.unary(x, Unary::Abs)
    }

    pub fn square(&mut self, x: Var) -> Var {
        self.unary(x, Unary::Square)
    }

    /// Adds a `1 × cols` row to every row of `x`.
    pub fn add_row(&mut self, x: Var, b: Var) -> Var {
        let seg = self.value(x).rows;
        self.add_seg_rows(x, b, seg)
    }

    /// `x` holds `G` consecutive segments of `seg` rows; `b` is `G × cols`.
    pub fn add_seg_rows(&mut self, x: Var, b: Var, seg: usize) -> Var {
        let xv = self.value(x);
        let bv = self.value(b);
        assert_eq!(xv.cols, bv.cols, "add_seg_rows width");
        assert_eq!(xv.rows, bv.rows * seg, "add_seg_rows segment count");
        let mut value = xv.clone();
        for r in 0..value.rows {
            let brow = bv.row(r / seg);
            for (o, &bb) in value.row_mut(r).iter_mut().zip(brow) {
                *o = *o + bb;
            }
        }
        self.push(value, Op::AddSegRows { x, b, seg })
    }

    pub fn mul_seg_rows(&mut self, x: Var, g: Var, seg: usize) -> Var {
        let xv = self.value(x);
        let gv = self.value(g);
        assert_eq!(xv.cols, gv.cols, "mul_seg_rows width");
        assert_eq!(xv.rows, gv.rows * seg, "mul_seg_rows segment count");
        let mut value = xv.clone();
        for r in 0..value.rows {
            let grow = gv.row(r / seg);
            for (o, &gg) in value.row_mut(r).iter_mut().zip(grow) {
                *o = *o * gg;
            }
        }
        self.push(value, Op::MulSegRows { x, g, seg })
    }

    /// Channelwise max over each segment of `seg` rows.
    pub fn seg_max(&mut self, x: Var, seg: usize) -> Var {
        let xv = self.value(x);
        assert!(seg > 0 && xv.rows % seg == 0, "seg_max segment size");
        let groups = xv.rows / seg;
        let mut value = Mat::zeros(groups, xv.cols);
        let mut argmax = vec![0usize; groups * xv.cols];
        for g in 0..groups {
            let base = g * seg;
            let out = value.row_mut(g);
            out.copy_from_slice(xv.row(base));
            let am = &mut argmax[g * xv.cols..(g + 1) * xv.cols];
            am.iter_mut().for_each(|a| *a = base);
            for r in base + 1..base + seg {
                for (c, &v) in xv.row(r).iter().enumerate() {
                    if v > out[c] {
                        out[c] = v;
                        am[c] = r;
                    }
                }
            }
        }
        self.push(value, Op::SegMax { x, argmax })
    }

    /// Zero-mean / unit-variance per column within each segment of `seg`
    /// rows (biased variance).
    pub fn normalize(&mut self, x: Var, seg: usize, eps: f64) -> Var {
        let xv = self.value(x);
        assert!(seg > 0 && xv.rows % seg == 0, "normalize segment size");
        let groups = xv.rows / seg;
        let cols = xv.cols;
        let mut value = xv.clone();
        let mut inv_std = vec![0.0f64; groups * cols];
        let n = seg as f64;
        for g in 0..groups {
            let mut mean = vec![0.0f64; cols];
            for r in g * seg..(g + 1) * seg {
                for (m, v) in mean.iter_mut().zip(xv.row(r)) {
                    *m += v.as_f64();
                }
            }
            mean.iter_mut().for_each(|m| *m /= n);
            let mut var = vec![0.0f64; cols];
            for r in g * seg..(g + 1) * seg {
                for ((s, v), m) in var.iter_mut().zip(xv.row(r)).zip(&mean) {
                    let d = v.as_f64() - m;
                    *s += d * d;
                }
            }
            for c in 0..cols {
                inv_std[g * cols + c] = 1.0 / (var[c] / n + eps).sqrt();
            }
            for r in g * seg..(g + 1) * seg {
                let row = value.row_mut(r);
                for c in 0..cols {
                    let v = (row[c].as_f64() - mean[c]) * inv_std[g * cols + c];
                    row[c] = S::from_f64_lossy(v);
                }
            }
        }
        self.push(value, Op::Normalize { x, seg, inv_std })
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Var {
        let xv = self.value(x);
        assert!(start < end && end <= xv.cols, "slice_cols range");
        let mut value = Mat::zeros(xv.rows, end - start);
        for r in 0..xv.rows {
            value.row_mut(r).copy_from_slice(&xv.row(r)[start..end]);
        }
        self.push(value, Op::SliceCols { x, start })
    }

    /// Stacks the operands vertically.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let cols = self.value(parts[0]).cols;
        let mut data = Vec::new();
        for &p in parts {
            let v = self.value(p);
            assert_eq!(v.cols, cols, "concat_rows width");
            data.extend_from_slice(&v.data);
        }
        let rows = data.len() / cols;
        self.push(Mat::from_vec(rows, cols, data), Op::ConcatRows(parts.to_vec()))
    }

    /// Interleaves segmented operands: output segment `g` is segment `g` of
    /// each part in order. Every part must have the same segment count.
    pub fn concat_seg_rows(&mut self, parts: &[Var], segs: &[usize]) -> Var {
        assert!(!parts.is_empty() && parts.len() == segs.len());
        let cols = self.value(parts[0]).cols;
        let groups = self.value(parts[0]).rows / segs[0];
        let mut data = Vec::new();
        for g in 0..groups {
            for (&p, &seg) in parts.iter().zip(segs) {
                let v = self.value(p);
                assert_eq!(v.cols, cols, "concat_seg_rows width");
                assert_eq!(v.rows, seg * groups, "concat_seg_rows segment count");
                data.extend_from_slice(&v.data[g * seg * cols..(g + 1) * seg * cols]);
            }
        }
        let rows = data.len() / cols;
        self.push(
            Mat::from_vec(rows, cols, data),
            Op::ConcatSegRows { parts: parts.to_vec(), segs: segs.to_vec() },
        )
    }

    /// Per-instance bidirectional Chamfer distance between segmented
    /// `k × 3` point blocks. Returns a `G × 1` column.
    pub fn chamfer(&mut self, p: Var, q: Var, seg_p: usize, seg_q: usize) -> Var {
        let pv = self.value(p);
        let qv = self.value(q);
        assert_eq!(pv.cols, 3);
        assert_eq!(qv.cols, 3);
        let groups = pv.rows / seg_p;
        assert_eq!(groups * seg_p, pv.rows, "chamfer segment size");
        assert_eq!(groups * seg_q, qv.rows, "chamfer instance count");
        let mut value = Mat::zeros(groups, 1);
        let mut nn_pq = vec![0usize; pv.rows];
        let mut nn_qp = vec![0usize; qv.rows];
        for g in 0..groups {
            let ps = points_of(pv, g * seg_p, seg_p);
            let qs = points_of(qv, g * seg_q, seg_q);
            let (fwd, idx_pq) = crate::geometry::nearest_sq(&ps, &qs);
            let (bwd, idx_qp) = crate::geometry::nearest_sq(&qs, &ps);
            for (i, j) in idx_pq.into_iter().enumerate() {
                nn_pq[g * seg_p + i] = g * seg_q + j;
            }
            for (i, j) in idx_qp.into_iter().enumerate() {
                nn_qp[g * seg_q + i] = g * seg_p + j;
            }
            let f: f64 = fwd.iter().sum::<f64>() / seg_p as f64;
            let b: f64 = bwd.iter().sum::<f64>() / seg_q as f64;
            value.data[g] = S::from_f64_lossy(f + b);
        }
        self.push(value, Op::Chamfer { p, q, seg_p, seg_q, nn_pq, nn_qp })
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let s: f64 = xv.data.iter().map(|v| v.as_f64()).sum();
        let value = Mat::from_vec(1, 1, vec![S::from_f64_lossy(s / xv.len() as f64)]);
        self.push(value, Op::Mean(x))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let s: f64 = xv.data.iter().map(|v| v.as_f64()).sum();
        let value = Mat::from_vec(1, 1, vec![S::from_f64_lossy(s)]);
        self.push(value, Op::Sum(x))
    }

    /// Reverse sweep from a `1 × 1` loss node.
    pub fn backward(&self, loss: Var) -> Result<Gradients<S>> {
        if !self.recording {
            return Err(Error::NoRecordedForward);
        }
        if loss.0 >= self.nodes.len() {
            return Err(Error::NoRecordedForward);
        }
        if self.value(loss).shape() != (1, 1) {
            return Err(Error::ShapeMismatch(format!(
                "loss must be 1x1, got {:?}",
                self.value(loss).shape()
            )));
        }
        let mut adj: Vec<Option<Mat<S>>> = (0..self.nodes.len()).map(|_| None).collect();
        adj[loss.0] = Some(Mat::filled(1, 1, S::one()));

        for i in (0..=loss.0).rev() {
            let Some(dy) = adj[i].take() else { continue };
            self.propagate(i, &dy, &mut adj);
            adj[i] = Some(dy);
        }
        Ok(Gradients { nodes: adj, params: self.params.clone() })
    }

    fn propagate(&self, i: usize, dy: &Mat<S>, adj: &mut [Option<Mat<S>>]) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf | Op::Param => {}
            Op::MatMul(a, b) => {
                let av = self.value(*a);
                let bv = self.value(*b);
                accumulate(adj, *a, dy.matmul_t(bv));
                accumulate(adj, *b, av.t_matmul(dy));
            }
            Op::Add(a, b) => {
                accumulate(adj, *a, dy.clone());
                accumulate(adj, *b, dy.clone());
            }
            Op::Sub(a, b) => {
                accumulate(adj, *a, dy.clone());
                accumulate(adj, *b, dy.map(|v| -v));
            }
            Op::Mul(a, b) => {
                let av = self.value(*a);
                let bv = self.value(*b);
                accumulate(adj, *a, dy.zip_map(bv, |d, y| d * y));
                accumulate(adj, *b, dy.zip_map(av, |d, x| d * x));
            }
            Op::Scale(x, c) => {
                let cs = S::from_f64_lossy(*c);
                accumulate(adj, *x, dy.map(|d| d * cs));
            }
            Op::AddScalar(x) => accumulate(adj, *x, dy.clone()),
            Op::Unary(x, kind) => {
                let xv = self.value(*x);
                let yv = &node.value;
                let mut dx = dy.clone();
                for ((d, &xi), &yi) in dx.data.iter_mut().zip(&xv.data).zip(&yv.data) {
                    let local = match kind {
                        Unary::Relu => {
                            if xi > S::zero() {
                                S::one()
                            } else {
                                S::zero()
                            }
                        }
                        Unary::Tanh => S::one() - yi * yi,
                        Unary::Softplus => sigmoid(xi),
                        Unary::Abs => {
                            if xi > S::zero() {
                                S::one()
                            } else if xi < S::zero() {
                                -S::one()
                            } else {
                                S::zero()
                            }
                        }
                        Unary::Square => xi + xi,
                    };
                    *d = *d * local;
                }
                accumulate(adj, *x, dx);
            }
            Op::AddSegRows { x, b, seg } => {
                let bv = self.value(*b);
                let mut db = Mat::zeros(bv.rows, bv.cols);
                for r in 0..dy.rows {
                    let row = db.row_mut(r / seg);
                    for (o, &d) in row.iter_mut().zip(dy.row(r)) {
                        *o = *o + d;
                    }
                }
                accumulate(adj, *x, dy.clone());
                accumulate(adj, *b, db);
            }
            Op::MulSegRows { x, g, seg } => {
                let xv = self.value(*x);
                let gv = self.value(*g);
                let mut dx = dy.clone();
                let mut dg = Mat::zeros(gv.rows, gv.cols);
                for r in 0..dy.rows {
                    let grow = gv.row(r / seg);
                    for (o, &gg) in dx.row_mut(r).iter_mut().zip(grow) {
                        *o = *o * gg;
                    }
                    let xrow = xv.row(r);
                    let drow = dy.row(r);
                    let out = dg.row_mut(r / seg);
                    for c in 0..out.len() {
                        out[c] = out[c] + drow[c] * xrow[c];
                    }
                }
                accumulate(adj, *x, dx);
                accumulate(adj, *g, dg);
            }
            Op::SegMax { x, argmax, .. } => {
                let xv = self.value(*x);
                let mut dx = Mat::zeros(xv.rows, xv.cols);
                let cols = xv.cols;
                for (k, &r) in argmax.iter().enumerate() {
                    let c = k % cols;
                    dx.data[r * cols + c] = dx.data[r * cols + c] + dy.data[k];
                }
                accumulate(adj, *x, dx);
            }
            Op::Normalize { x, seg, inv_std } => {
                let xhat = &node.value;
                let cols = xhat.cols;
                let groups = xhat.rows / seg;
                let n = *seg as f64;
                let mut dx = Mat::zeros(xhat.rows, cols);
                for g in 0..groups {
                    let mut sum_dy = vec![0.0f64; cols];
                    let mut sum_dy_xhat = vec![0.0f64; cols];
                    for r in g * seg..(g + 1) * seg {
                        for c in 0..cols {
                            let d = dy.get(r, c).as_f64();
                            sum_dy[c] += d;
                            sum_dy_xhat[c] += d * xhat.get(r, c).as_f64();
                        }
                    }
                    for r in g * seg..(g + 1) * seg {
                        for c in 0..cols {
                            let d = dy.get(r, c).as_f64();
                            let xh = xhat.get(r, c).as_f64();
                            let v = inv_std[g * cols + c] / n
                                * (n * d - sum_dy[c] - xh * sum_dy_xhat[c]);
                            dx.data[r * cols + c] = S::from_f64_lossy(v);
                        }
                    }
                }
                accumulate(adj, *x, dx);
            }
            Op::SliceCols { x, start } => {
                let xv = self.value(*x);
                let mut dx = Mat::zeros(xv.rows, xv.cols);
                for r in 0..dy.rows {
                    dx.row_mut(r)[*start..*start + dy.cols].copy_from_slice(dy.row(r));
                }
                accumulate(adj, *x, dx);
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let (rows, cols) = self.shape(p);
                    let part = Mat::from_vec(
                        rows,
                        cols,
                        dy.data[offset * cols..(offset + rows) * cols].to_vec(),
                    );
                    offset += rows;
                    accumulate(adj, p, part);
                }
            }
            Op::ConcatSegRows { parts, segs } => {
                let cols = dy.cols;
                let total_seg: usize = segs.iter().sum();
                let groups = dy.rows / total_seg;
                for (k, (&p, &seg)) in parts.iter().zip(segs).enumerate() {
                    let before: usize = segs[..k].iter().sum();
                    let mut part = Mat::zeros(seg * groups, cols);
                    for g in 0..groups {
                        let src = (g * total_seg + before) * cols;
                        part.data[g * seg * cols..(g + 1) * seg * cols]
                            .copy_from_slice(&dy.data[src..src + seg * cols]);
                    }
                    accumulate(adj, p, part);
                }
            }
            Op::Chamfer { p, q, seg_p, seg_q, nn_pq, nn_qp } => {
                let pv = self.value(*p);
                let qv = self.value(*q);
                let mut dp = Mat::zeros(pv.rows, 3);
                let mut dq = Mat::zeros(qv.rows, 3);
                for (i, &j) in nn_pq.iter().enumerate() {
                    let w = dy.data[i / seg_p].as_f64() * 2.0 / *seg_p as f64;
                    for c in 0..3 {
                        let d = (pv.get(i, c).as_f64() - qv.get(j, c).as_f64()) * w;
                        let ds = S::from_f64_lossy(d);
                        dp.data[i * 3 + c] = dp.data[i * 3 + c] + ds;
                        dq.data[j * 3 + c] = dq.data[j * 3 + c] - ds;
                    }
                }
                for (j, &i) in nn_qp.iter().enumerate() {
                    let w = dy.data[j / seg_q].as_f64() * 2.0 / *seg_q as f64;
                    for c in 0..3 {
                        let d = (qv.get(j, c).as_f64() - pv.get(i, c).as_f64()) * w;
                        let ds = S::from_f64_lossy(d);
                        dq.data[j * 3 + c] = dq.data[j * 3 + c] + ds;
                        dp.data[i * 3 + c] = dp.data[i * 3 + c] - ds;
                    }
                }
                accumulate(adj, *p, dp);
                accumulate(adj, *q, dq);
            }
            Op::Mean(x) => {
                let (rows, cols) = self.shape(*x);
                let v = dy.data[0] / S::from_usize(rows * cols).unwrap_or_else(S::one);
                accumulate(adj, *x, Mat::filled(rows, cols, v));
            }
            Op::Sum(x) => {
                let (rows, cols) = self.shape(*x);
                accumulate(adj, *x, Mat::filled(rows, cols, dy.data[0]));
            }
        }
    }
}

fn accumulate<S: Real>(adj: &mut [Option<Mat<S>>], v: Var, grad: Mat<S>) {
    match &mut adj[v.0] {
        Some(existing) => existing.add_assign(&grad),
        slot @ None => *slot = Some(grad),
    }
}

fn points_of<S: Real>(m: &Mat<S>, start: usize, count: usize) -> Vec<[f64; 3]> {
    (start..start + count)
        .map(|r| {
            let row = m.row(r);
            [row[0].as_f64(), row[1].as_f64(), row[2].as_f64()]
        })
        .collect()
}

fn softplus<S: Real>(x: S) -> S {
    // log1p(exp(-|x|)) + max(x, 0)
    (-x.abs()).exp().ln_1p() + x.max(S::zero())
}

fn sigmoid<S: Real>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}
