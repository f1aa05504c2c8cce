//! Tape-based reverse-mode automatic differentiation over dense matrices.
//!
//! A forward pass records every operation on a [`Tape`]. Calling
//! [`Tape::backward`] on a `(1, 1)` loss walks the tape in reverse and
//! returns the gradient of every node that depends on a parameter or a
//! gradient-tracked input.

use std::collections::HashMap;

use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;
use crate::scalar::Scalar;

/// Index of a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<T> {
    Leaf,
    Param,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    MulCol(Var, Var),
    Scale(Var, T),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    SliceRows(Var, usize, usize),
    BroadcastRows(Var),
    Relu(Var),
    LeakyRelu(Var, T),
    Elu(Var, T),
    Sigmoid(Var),
    Log(Var),
    MaskedSoftmax(Var),
    LayerNorm(Var, Vec<T>),
    MeanRows(Var),
    SumAll(Var),
    Gather(Var, Vec<usize>),
    SegmentSum(Var, Vec<usize>),
    SegmentSoftmax(Var, Vec<usize>),
    Pick(Var, usize, usize),
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    tracked: bool,
}

/// Records a forward computation for later differentiation.
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    params: HashMap<ParamId, Var>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), params: HashMap::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, tracked: bool) -> Var {
        self.nodes.push(Node { value, op, tracked });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// A value that receives no gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// A leaf whose gradient is reported by [`Gradients::wrt`].
    pub fn input(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Loads a parameter; repeated loads of the same id share one node.
    pub fn param(&mut self, store: &ParamStore<T>, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push(store.get(id).clone(), Op::Param, true);
        self.params.insert(id, v);
        v
    }

    fn unary(&mut self, x: Var, value: Tensor<T>, op: Op<T>) -> Var {
        let tracked = self.tracked(x);
        self.push(value, op, tracked)
    }

    fn binary(&mut self, a: Var, b: Var, value: Tensor<T>, op: Op<T>) -> Var {
        let tracked = self.tracked(a) || self.tracked(b);
        self.push(value, op, tracked)
    }

    fn expect_same_shape(&self, what: &str, a: Var, b: Var) {
        let (sa, sb) = (self.shape(a), self.shape(b));
        assert_eq!(sa, sb, "{what}: shape mismatch {sa:?} vs {sb:?}");
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).matmul(self.value(b));
        self.binary(a, b, value, Op::MatMul(a, b))
    }

    pub fn transpose(&mut self, x: Var) -> Var {
        let value = self.value(x).transpose();
        self.unary(x, value, Op::Transpose(x))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.expect_same_shape("add", a, b);
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.binary(a, b, value, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.expect_same_shape("sub", a, b);
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.binary(a, b, value, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.expect_same_shape("mul", a, b);
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.binary(a, b, value, Op::Mul(a, b))
    }

    /// Adds a `(1, c)` row to every row of `x`.
    pub fn add_row(&mut self, x: Var, row: Var) -> Var {
        let (r, c) = self.shape(x);
        let rs = self.shape(row);
        assert_eq!(rs, (1, c), "add_row: shape mismatch ({r}, {c}) vs {rs:?}");
        let mut value = self.value(x).clone();
        let b = self.value(row).data().to_vec();
        for i in 0..r {
            for (v, &bv) in value.row_mut(i).iter_mut().zip(&b) {
                *v += bv;
            }
        }
        self.binary(x, row, value, Op::AddRow(x, row))
    }

    /// Multiplies every row of `x` elementwise by a `(1, c)` row.
    pub fn mul_row(&mut self, x: Var, row: Var) -> Var {
        let (r, c) = self.shape(x);
        let rs = self.shape(row);
        assert_eq!(rs, (1, c), "mul_row: shape mismatch ({r}, {c}) vs {rs:?}");
        let mut value = self.value(x).clone();
        let s = self.value(row).data().to_vec();
        for i in 0..r {
            for (v, &sv) in value.row_mut(i).iter_mut().zip(&s) {
                *v *= sv;
            }
        }
        self.binary(x, row, value, Op::MulRow(x, row))
    }

    /// Scales row `i` of `x` by `col[i]`, where `col` is `(r, 1)`.
    pub fn mul_col(&mut self, x: Var, col: Var) -> Var {
        let (r, c) = self.shape(x);
        let cs = self.shape(col);
        assert_eq!(cs, (r, 1), "mul_col: shape mismatch ({r}, {c}) vs {cs:?}");
        let mut value = self.value(x).clone();
        for i in 0..r {
            let s = self.value(col).get(i, 0);
            for v in value.row_mut(i) {
                *v *= s;
            }
        }
        self.binary(x, col, value, Op::MulCol(x, col))
    }

    pub fn scale(&mut self, x: Var, k: T) -> Var {
        let value = self.value(x).map(|v| v * k);
        self.unary(x, value, Op::Scale(x, k))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty(), "concat_cols: no inputs");
        let r = self.shape(parts[0]).0;
        for &p in parts {
            let s = self.shape(p);
            assert_eq!(s.0, r, "concat_cols: row mismatch {:?} vs {s:?}", self.shape(parts[0]));
        }
        let total: usize = parts.iter().map(|&p| self.shape(p).1).sum();
        let mut value = Tensor::zeros(r, total);
        for i in 0..r {
            let mut off = 0;
            for &p in parts {
                let src = self.value(p).row(i);
                value.row_mut(i)[off..off + src.len()].copy_from_slice(src);
                off += src.len();
            }
        }
        let tracked = parts.iter().any(|&p| self.tracked(p));
        self.push(value, Op::ConcatCols(parts.to_vec()), tracked)
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Var {
        let (r, c) = self.shape(x);
        assert!(start <= end && end <= c, "slice_cols: {start}..{end} out of ({r}, {c})");
        let mut value = Tensor::zeros(r, end - start);
        for i in 0..r {
            value.row_mut(i).copy_from_slice(&self.value(x).row(i)[start..end]);
        }
        self.unary(x, value, Op::SliceCols(x, start))
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, end: usize) -> Var {
        let (r, c) = self.shape(x);
        assert!(start <= end && end <= r, "slice_rows: {start}..{end} out of ({r}, {c})");
        let value = Tensor::from_vec(end - start, c, self.value(x).data()[start * c..end * c].to_vec());
        self.unary(x, value, Op::SliceRows(x, start, end))
    }

    /// Repeats a `(1, c)` row `n` times.
    pub fn broadcast_rows(&mut self, x: Var, n: usize) -> Var {
        let (r, c) = self.shape(x);
        assert_eq!(r, 1, "broadcast_rows: expected a single row, got ({r}, {c})");
        let src = self.value(x).data().to_vec();
        let mut data = Vec::with_capacity(n * c);
        for _ in 0..n {
            data.extend_from_slice(&src);
        }
        self.unary(x, Tensor::from_vec(n, c, data), Op::BroadcastRows(x))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| if v > T::zero() { v } else { T::zero() });
        self.unary(x, value, Op::Relu(x))
    }

    pub fn leaky_relu(&mut self, x: Var, slope: T) -> Var {
        let value = self.value(x).map(|v| if v > T::zero() { v } else { v * slope });
        self.unary(x, value, Op::LeakyRelu(x, slope))
    }

    pub fn elu(&mut self, x: Var, alpha: T) -> Var {
        let value = self.value(x).map(|v| if v > T::zero() { v } else { alpha * v.exp_m1() });
        self.unary(x, value, Op::Elu(x, alpha))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.value(x).map(sigmoid);
        self.unary(x, value, Op::Sigmoid(x))
    }

    pub fn log(&mut self, x: Var) -> Var {
        let value = self.value(x).map(|v| v.ln());
        self.unary(x, value, Op::Log(x))
    }

    /// Row-wise softmax over the columns where `mask` is true. Masked
    /// columns receive exactly zero probability.
    pub fn masked_softmax(&mut self, x: Var, mask: &[bool]) -> Var {
        let (r, c) = self.shape(x);
        assert_eq!(mask.len(), c, "masked_softmax: mask length {} vs ({r}, {c})", mask.len());
        assert!(mask.iter().any(|&m| m), "masked_softmax: every position masked");
        let mut value = Tensor::zeros(r, c);
        for i in 0..r {
            let row = self.value(x).row(i);
            let max = row
                .iter()
                .zip(mask)
                .filter(|(_, &m)| m)
                .fold(T::neg_infinity(), |acc, (&v, _)| acc.max(v));
            let mut total = T::zero();
            let out = value.row_mut(i);
            for j in 0..c {
                if mask[j] {
                    let e = (row[j] - max).exp();
                    out[j] = e;
                    total += e;
                }
            }
            for v in out.iter_mut() {
                *v /= total;
            }
        }
        self.unary(x, value, Op::MaskedSoftmax(x))
    }

    pub fn softmax(&mut self, x: Var) -> Var {
        let c = self.shape(x).1;
        self.masked_softmax(x, &vec![true; c])
    }

    /// Per-row standardisation to zero mean and unit variance (no affine).
    pub fn layer_norm(&mut self, x: Var, eps: T) -> Var {
        let (r, c) = self.shape(x);
        let n = T::lit(c as f64);
        let mut value = Tensor::zeros(r, c);
        let mut inv_std = Vec::with_capacity(r);
        for i in 0..r {
            let row = self.value(x).row(i);
            let mean = row.iter().copied().sum::<T>() / n;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
            let inv = T::one() / (var + eps).sqrt();
            for (o, &v) in value.row_mut(i).iter_mut().zip(row) {
                *o = (v - mean) * inv;
            }
            inv_std.push(inv);
        }
        self.unary(x, value, Op::LayerNorm(x, inv_std))
    }

    /// Column means, `(r, c) -> (1, c)`. An empty input yields zeros.
    pub fn mean_rows(&mut self, x: Var) -> Var {
        let (r, c) = self.shape(x);
        let mut value = Tensor::zeros(1, c);
        if r > 0 {
            let n = T::lit(r as f64);
            for i in 0..r {
                for (o, &v) in value.data_mut().iter_mut().zip(self.value(x).row(i)) {
                    *o += v;
                }
            }
            for o in value.data_mut() {
                *o /= n;
            }
        }
        self.unary(x, value, Op::MeanRows(x))
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let value = Tensor::scalar(self.value(x).sum());
        self.unary(x, value, Op::SumAll(x))
    }

    /// Selects rows of `x` by index (repeats allowed).
    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Var {
        let (r, c) = self.shape(x);
        let mut value = Tensor::zeros(idx.len(), c);
        for (i, &k) in idx.iter().enumerate() {
            assert!(k < r, "gather_rows: index {k} out of ({r}, {c})");
            value.row_mut(i).copy_from_slice(self.value(x).row(k));
        }
        self.unary(x, value, Op::Gather(x, idx.to_vec()))
    }

    /// Sums rows of `x` into `n` buckets: `out[seg[i]] += x[i]`.
    pub fn segment_sum(&mut self, x: Var, seg: &[usize], n: usize) -> Var {
        let (r, c) = self.shape(x);
        assert_eq!(seg.len(), r, "segment_sum: {} segment ids for ({r}, {c})", seg.len());
        let mut value = Tensor::zeros(n, c);
        for (i, &s) in seg.iter().enumerate() {
            assert!(s < n, "segment_sum: segment {s} out of {n}");
            for (o, &v) in value.row_mut(s).iter_mut().zip(self.value(x).row(i)) {
                *o += v;
            }
        }
        self.unary(x, value, Op::SegmentSum(x, seg.to_vec()))
    }

    /// Softmax of a `(e, 1)` column within each segment group.
    pub fn segment_softmax(&mut self, x: Var, seg: &[usize], n: usize) -> Var {
        let (r, c) = self.shape(x);
        assert_eq!(c, 1, "segment_softmax: expected a column, got ({r}, {c})");
        assert_eq!(seg.len(), r, "segment_softmax: {} segment ids for ({r}, {c})", seg.len());
        let xs = self.value(x).data();
        let mut max = vec![T::neg_infinity(); n];
        for (&s, &v) in seg.iter().zip(xs) {
            max[s] = max[s].max(v);
        }
        let mut total = vec![T::zero(); n];
        let mut out: Vec<T> = seg.iter().zip(xs).map(|(&s, &v)| (v - max[s]).exp()).collect();
        for (&s, &e) in seg.iter().zip(&out) {
            total[s] += e;
        }
        for (o, &s) in out.iter_mut().zip(seg) {
            *o /= total[s];
        }
        self.unary(x, Tensor::from_vec(r, 1, out), Op::SegmentSoftmax(x, seg.to_vec()))
    }

    /// Extracts the single element `x[r, c]` as a `(1, 1)` tensor.
    pub fn pick(&mut self, x: Var, r: usize, c: usize) -> Var {
        let value = Tensor::scalar(self.value(x).get(r, c));
        self.unary(x, value, Op::Pick(x, r, c))
    }

    /// Reverse pass from a `(1, 1)` output.
    pub fn backward(&self, output: Var) -> Gradients<T> {
        assert_eq!(self.shape(output), (1, 1), "backward: output must be a scalar");
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Tensor::scalar(T::one()));

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.tracked {
                continue;
            }
            if matches!(node.op, Op::Leaf | Op::Param) {
                // Leaves keep their gradient for the caller.
                grads[idx] = Some(g);
                continue;
            }
            let mut acc = |v: Var, delta: Tensor<T>| {
                if !self.nodes[v.0].tracked {
                    return;
                }
                match &mut grads[v.0] {
                    Some(existing) => existing.add_assign(&delta),
                    slot => *slot = Some(delta),
                }
            };
            match &node.op {
                Op::Leaf | Op::Param => unreachable!(),
                Op::MatMul(a, b) => {
                    if self.tracked(*a) {
                        acc(*a, g.matmul_t(self.value(*b)));
                    }
                    if self.tracked(*b) {
                        acc(*b, self.value(*a).t_matmul(&g));
                    }
                }
                Op::Transpose(x) => acc(*x, g.transpose()),
                Op::Add(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g);
                }
                Op::Sub(a, b) => {
                    acc(*b, g.map(|v| -v));
                    acc(*a, g);
                }
                Op::Mul(a, b) => {
                    acc(*a, g.zip_map(self.value(*b), |x, y| x * y));
                    acc(*b, g.zip_map(self.value(*a), |x, y| x * y));
                }
                Op::AddRow(x, row) => {
                    acc(*row, column_sums(&g));
                    acc(*x, g);
                }
                Op::MulRow(x, row) => {
                    let s = self.value(*row);
                    let xv = self.value(*x);
                    let mut gx = g.clone();
                    let mut gs = Tensor::zeros(1, g.cols());
                    for i in 0..g.rows() {
                        for j in 0..g.cols() {
                            gx.set(i, j, g.get(i, j) * s.get(0, j));
                            gs.data_mut()[j] += g.get(i, j) * xv.get(i, j);
                        }
                    }
                    acc(*x, gx);
                    acc(*row, gs);
                }
                Op::MulCol(x, col) => {
                    let s = self.value(*col);
                    let xv = self.value(*x);
                    let mut gx = g.clone();
                    let mut gs = Tensor::zeros(g.rows(), 1);
                    for i in 0..g.rows() {
                        let si = s.get(i, 0);
                        let mut dot = T::zero();
                        for j in 0..g.cols() {
                            gx.set(i, j, g.get(i, j) * si);
                            dot += g.get(i, j) * xv.get(i, j);
                        }
                        gs.set(i, 0, dot);
                    }
                    acc(*x, gx);
                    acc(*col, gs);
                }
                Op::Scale(x, k) => acc(*x, g.map(|v| v * *k)),
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let (r, c) = self.shape(p);
                        let mut gp = Tensor::zeros(r, c);
                        for i in 0..r {
                            gp.row_mut(i).copy_from_slice(&g.row(i)[off..off + c]);
                        }
                        off += c;
                        acc(p, gp);
                    }
                }
                Op::SliceCols(x, start) => {
                    let (r, c) = self.shape(*x);
                    let mut gx = Tensor::zeros(r, c);
                    for i in 0..r {
                        gx.row_mut(i)[*start..*start + g.cols()].copy_from_slice(g.row(i));
                    }
                    acc(*x, gx);
                }
                Op::SliceRows(x, start, end) => {
                    let (r, c) = self.shape(*x);
                    let mut gx = Tensor::zeros(r, c);
                    gx.data_mut()[start * c..end * c].copy_from_slice(g.data());
                    acc(*x, gx);
                }
                Op::BroadcastRows(x) => acc(*x, column_sums(&g)),
                Op::Relu(x) => {
                    acc(*x, g.zip_map(self.value(*x), |gv, xv| if xv > T::zero() { gv } else { T::zero() }))
                }
                Op::LeakyRelu(x, slope) => acc(
                    *x,
                    g.zip_map(self.value(*x), |gv, xv| if xv > T::zero() { gv } else { gv * *slope }),
                ),
                Op::Elu(x, alpha) => {
                    let xv = self.value(*x);
                    let mut gx = g.clone();
                    for ((o, &gv), &v) in gx.data_mut().iter_mut().zip(g.data()).zip(xv.data()) {
                        *o = if v > T::zero() { gv } else { gv * *alpha * v.exp() };
                    }
                    acc(*x, gx);
                }
                Op::Sigmoid(x) => acc(*x, g.zip_map(&node.value, |gv, y| gv * y * (T::one() - y))),
                Op::Log(x) => acc(*x, g.zip_map(self.value(*x), |gv, xv| gv / xv)),
                Op::MaskedSoftmax(x) => {
                    let y = &node.value;
                    let mut gx = Tensor::zeros(y.rows(), y.cols());
                    for i in 0..y.rows() {
                        let dot: T = y.row(i).iter().zip(g.row(i)).map(|(&p, &gv)| p * gv).sum();
                        for ((o, &p), &gv) in gx.row_mut(i).iter_mut().zip(y.row(i)).zip(g.row(i)) {
                            *o = p * (gv - dot);
                        }
                    }
                    acc(*x, gx);
                }
                Op::LayerNorm(x, inv_std) => {
                    let y = &node.value;
                    let n = T::lit(y.cols() as f64);
                    let mut gx = Tensor::zeros(y.rows(), y.cols());
                    for i in 0..y.rows() {
                        let gr = g.row(i);
                        let yr = y.row(i);
                        let mean_g = gr.iter().copied().sum::<T>() / n;
                        let mean_gy = gr.iter().zip(yr).map(|(&a, &b)| a * b).sum::<T>() / n;
                        for ((o, &gv), &yv) in gx.row_mut(i).iter_mut().zip(gr).zip(yr) {
                            *o = inv_std[i] * (gv - mean_g - yv * mean_gy);
                        }
                    }
                    acc(*x, gx);
                }
                Op::MeanRows(x) => {
                    let (r, c) = self.shape(*x);
                    if r > 0 {
                        let n = T::lit(r as f64);
                        let row: Vec<T> = g.data().iter().map(|&v| v / n).collect();
                        let mut gx = Tensor::zeros(r, c);
                        for i in 0..r {
                            gx.row_mut(i).copy_from_slice(&row);
                        }
                        acc(*x, gx);
                    }
                }
                Op::SumAll(x) => {
                    let (r, c) = self.shape(*x);
                    acc(*x, Tensor::filled(r, c, g.get(0, 0)));
                }
                Op::Gather(x, idx) => {
                    let (r, c) = self.shape(*x);
                    let mut gx = Tensor::zeros(r, c);
                    for (i, &k) in idx.iter().enumerate() {
                        for (o, &gv) in gx.row_mut(k).iter_mut().zip(g.row(i)) {
                            *o += gv;
                        }
                    }
                    acc(*x, gx);
                }
                Op::SegmentSum(x, seg) => {
                    let (r, c) = self.shape(*x);
                    let mut gx = Tensor::zeros(r, c);
                    for (i, &s) in seg.iter().enumerate() {
                        gx.row_mut(i).copy_from_slice(g.row(s));
                    }
                    acc(*x, gx);
                }
                Op::SegmentSoftmax(x, seg) => {
                    let y = node.value.data();
                    let n = seg.iter().copied().max().map_or(0, |m| m + 1);
                    let mut dot = vec![T::zero(); n];
                    for ((&s, &p), &gv) in seg.iter().zip(y).zip(g.data()) {
                        dot[s] += p * gv;
                    }
                    let data = seg
                        .iter()
                        .zip(y)
                        .zip(g.data())
                        .map(|((&s, &p), &gv)| p * (gv - dot[s]))
                        .collect();
                    acc(*x, Tensor::from_vec(y.len(), 1, data));
                }
                Op::Pick(x, r, c) => {
                    let (rows, cols) = self.shape(*x);
                    let mut gx = Tensor::zeros(rows, cols);
                    gx.set(*r, *c, g.get(0, 0));
                    acc(*x, gx);
                }
            }
        }
        Gradients { grads, params: self.params.clone() }
    }
}

fn column_sums<T: Scalar>(g: &Tensor<T>) -> Tensor<T> {
    let mut out = Tensor::zeros(1, g.cols());
    for i in 0..g.rows() {
        for (o, &v) in out.data_mut().iter_mut().zip(g.row(i)) {
            *o += v;
        }
    }
    out
}

pub(crate) fn sigmoid<T: Scalar>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

/// Result of a reverse pass: gradients of leaves and parameters.
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
    params: HashMap<ParamId, Var>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient of a leaf created with [`Tape::input`] or [`Tape::param`].
    pub fn wrt(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn param(&self, id: ParamId) -> Option<&Tensor<T>> {
        self.params.get(&id).and_then(|v| self.wrt(*v))
    }

    /// Gradients for every parameter of `store`, zero-filled where a
    /// parameter did not take part in the computation.
    pub fn dense_params(&self, store: &ParamStore<T>) -> Vec<Tensor<T>> {
        store
            .ids()
            .map(|id| {
                self.param(id).cloned().unwrap_or_else(|| {
                    let (r, c) = store.get(id).shape();
                    Tensor::zeros(r, c)
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masked_softmax_zeroes_masked_positions() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::row_vector(vec![0.0, 0.0, 0.0]));
        let p = tape.masked_softmax(x, &[true, true, false]);
        assert_eq!(tape.value(p).data(), &[0.5, 0.5, 0.0]);
    }

    #[test]
    fn sigmoid_at_zero_is_half() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::scalar(0.0));
        let y = tape.sigmoid(x);
        assert_eq!(tape.value(y).get(0, 0), 0.5);
    }

    #[test]
    fn shared_parameter_accumulates() {
        let mut store = ParamStore::<f64>::new();
        let w = store.add("w", Tensor::scalar(3.0));
        let mut tape = Tape::new();
        let a = tape.param(&store, w);
        let b = tape.param(&store, w);
        assert_eq!(a, b);
        let y = tape.mul(a, b);
        let grads = tape.backward(y);
        assert_eq!(grads.param(w).unwrap().get(0, 0), 6.0);
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut tape = Tape::<f64>::new();
        let c = tape.constant(Tensor::scalar(2.0));
        let x = tape.input(Tensor::scalar(5.0));
        let y = tape.mul(c, x);
        let grads = tape.backward(y);
        assert!(grads.wrt(c).is_none());
        assert_eq!(grads.wrt(x).unwrap().get(0, 0), 2.0);
    }

    #[test]
    fn segment_softmax_groups_independently() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::from_vec(3, 1, vec![1.0, 1.0, 7.0]));
        let y = tape.segment_softmax(x, &[0, 0, 1], 2);
        assert_eq!(tape.value(y).data(), &[0.5, 0.5, 1.0]);
    }
}
