//! Tape-based reverse-mode differentiation over rank-2 tensors.
//!
//! A [`Graph`] records every operation in execution order, so the node list
//! is already topologically sorted. [`Graph::backward`] walks it once in
//! reverse and accumulates gradients into the parameters that were read with
//! [`Graph::param`].

use crate::error::{NumericsError, Result};
use crate::params::{Gradients, ParamId, ParamStore};
use crate::tensor::{gemm, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    MulCol(NodeId, NodeId),
    Scale(NodeId, f64),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Square(NodeId),
    Sqrt(NodeId),
    ConcatCols(Vec<NodeId>),
    ConcatRows(Vec<NodeId>),
    SliceCols(NodeId, usize),
    SumAll(NodeId),
    SoftmaxRows(NodeId),
    Gather(NodeId, Vec<usize>),
    SoftmaxCrossEntropy {
        logits: NodeId,
        targets: Vec<usize>,
        probs: Tensor,
    },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// A single-owner computation tape.
pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<NodeId>>,
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Graph {
            params,
            nodes: Vec::new(),
            param_nodes: vec![None; params.len()],
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op_name: &'static str, value: Tensor, op: Op) -> Result<NodeId> {
        if !value.is_finite() {
            return Err(NumericsError::NonFinite { op: op_name });
        }
        self.nodes.push(Node { value, op });
        Ok(NodeId(self.nodes.len() - 1))
    }

    fn dims(&self, id: NodeId) -> Result<(usize, usize)> {
        self.nodes[id.0].value.dims2()
    }

    pub fn constant(&mut self, value: Tensor) -> Result<NodeId> {
        value.dims2()?;
        self.push("constant", value, Op::Constant)
    }

    /// Reads a registered parameter. Repeated reads share one node.
    pub fn param(&mut self, id: ParamId) -> Result<NodeId> {
        if let Some(node) = self.param_nodes[id.index()] {
            return Ok(node);
        }
        let value = self.params.get(id).clone();
        value.dims2()?;
        let node = self.push("param", value, Op::Param(id))?;
        self.param_nodes[id.index()] = Some(node);
        Ok(node)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, k) = self.dims(a)?;
        let (k2, n) = self.dims(b)?;
        if k != k2 {
            return Err(NumericsError::shape("matmul", format!("[{m}x{k}] * [{k2}x{n}]")));
        }
        let mut out = vec![0.0; m * n];
        gemm(
            m,
            k,
            n,
            self.value(a).data(),
            false,
            self.value(b).data(),
            false,
            &mut out,
            0.0,
        );
        self.push("matmul", Tensor::matrix(m, n, out)?, Op::MatMul(a, b))
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(NumericsError::shape(
                op,
                format!("{:?} vs {:?}", va.shape(), vb.shape()),
            ));
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("add", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push("add", v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("sub", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push("sub", v, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("mul", a, b)?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push("mul", v, Op::Mul(a, b))
    }

    /// `a[r x c] + row[1 x c]`, broadcasting the row over all rows of `a`.
    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId> {
        let (r, c) = self.dims(a)?;
        let (rr, rc) = self.dims(row)?;
        if rr != 1 || rc != c {
            return Err(NumericsError::shape(
                "add_row",
                format!("[{r}x{c}] + [{rr}x{rc}]"),
            ));
        }
        let rv = self.value(row).data().to_vec();
        let mut v = self.value(a).clone();
        for chunk in v.data_mut().chunks_mut(c) {
            for (x, b) in chunk.iter_mut().zip(&rv) {
                *x += b;
            }
        }
        self.push("add_row", v, Op::AddRow(a, row))
    }

    /// `a[r x c] * col[r x 1]`, scaling each row of `a` by one entry of `col`.
    pub fn mul_col(&mut self, a: NodeId, col: NodeId) -> Result<NodeId> {
        let (r, c) = self.dims(a)?;
        let (cr, cc) = self.dims(col)?;
        if cr != r || cc != 1 {
            return Err(NumericsError::shape(
                "mul_col",
                format!("[{r}x{c}] * [{cr}x{cc}]"),
            ));
        }
        let cv = self.value(col).data().to_vec();
        let mut v = self.value(a).clone();
        for (chunk, s) in v.data_mut().chunks_mut(c.max(1)).zip(&cv) {
            for x in chunk.iter_mut() {
                *x *= s;
            }
        }
        self.push("mul_col", v, Op::MulCol(a, col))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> Result<NodeId> {
        let v = self.value(a).map(|x| x * factor);
        self.push("scale", v, Op::Scale(a, factor))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        let v = self.value(a).map(sigmoid);
        self.push("sigmoid", v, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        let v = self.value(a).map(f64::tanh);
        self.push("tanh", v, Op::Tanh(a))
    }

    pub fn square(&mut self, a: NodeId) -> Result<NodeId> {
        let v = self.value(a).map(|x| x * x);
        self.push("square", v, Op::Square(a))
    }

    pub fn sqrt(&mut self, a: NodeId) -> Result<NodeId> {
        if self.value(a).data().iter().any(|&x| x < 0.0) {
            return Err(NumericsError::NonFinite { op: "sqrt" });
        }
        let v = self.value(a).map(f64::sqrt);
        self.push("sqrt", v, Op::Sqrt(a))
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let first = *parts
            .first()
            .ok_or_else(|| NumericsError::usage("concat_cols", "no inputs"))?;
        let rows = self.dims(first)?.0;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.dims(p)?;
            if r != rows {
                return Err(NumericsError::shape(
                    "concat_cols",
                    format!("row counts {rows} and {r}"),
                ));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut out = vec![0.0; rows * total];
        let mut offset = 0;
        for (&p, &w) in parts.iter().zip(&widths) {
            let src = self.value(p).data();
            for i in 0..rows {
                out[i * total + offset..i * total + offset + w]
                    .copy_from_slice(&src[i * w..(i + 1) * w]);
            }
            offset += w;
        }
        self.push(
            "concat_cols",
            Tensor::matrix(rows, total, out)?,
            Op::ConcatCols(parts.to_vec()),
        )
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let first = *parts
            .first()
            .ok_or_else(|| NumericsError::usage("concat_rows", "no inputs"))?;
        let cols = self.dims(first)?.1;
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let (r, c) = self.dims(p)?;
            if c != cols {
                return Err(NumericsError::shape(
                    "concat_rows",
                    format!("column counts {cols} and {c}"),
                ));
            }
            data.extend_from_slice(self.value(p).data());
            rows += r;
        }
        self.push(
            "concat_rows",
            Tensor::matrix(rows, cols, data)?,
            Op::ConcatRows(parts.to_vec()),
        )
    }

    /// Columns `start..start + width` of `a`.
    pub fn slice_cols(&mut self, a: NodeId, start: usize, width: usize) -> Result<NodeId> {
        let (r, c) = self.dims(a)?;
        if start + width > c {
            return Err(NumericsError::shape(
                "slice_cols",
                format!("columns {start}..{} of {c}", start + width),
            ));
        }
        let src = self.value(a).data();
        let mut out = Vec::with_capacity(r * width);
        for i in 0..r {
            out.extend_from_slice(&src[i * c + start..i * c + start + width]);
        }
        self.push(
            "slice_cols",
            Tensor::matrix(r, width, out)?,
            Op::SliceCols(a, start),
        )
    }

    pub fn sum_all(&mut self, a: NodeId) -> Result<NodeId> {
        let s = self.value(a).sum();
        self.push("sum_all", Tensor::scalar(s), Op::SumAll(a))
    }

    pub fn mean_all(&mut self, a: NodeId) -> Result<NodeId> {
        let n = self.value(a).len();
        if n == 0 {
            return Err(NumericsError::usage("mean_all", "empty tensor"));
        }
        let s = self.sum_all(a)?;
        self.scale(s, 1.0 / n as f64)
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax_rows(&mut self, a: NodeId) -> Result<NodeId> {
        let v = softmax_rows(self.value(a))?;
        self.push("softmax_rows", v, Op::SoftmaxRows(a))
    }

    /// Row lookup: output row `i` is `table[indices[i]]`.
    pub fn gather_rows(&mut self, table: NodeId, indices: &[usize]) -> Result<NodeId> {
        let (r, c) = self.dims(table)?;
        if let Some(&bad) = indices.iter().find(|&&i| i >= r) {
            return Err(NumericsError::usage(
                "gather_rows",
                format!("index {bad} out of range for {r} rows"),
            ));
        }
        let src = self.value(table).data();
        let mut out = Vec::with_capacity(indices.len() * c);
        for &i in indices {
            out.extend_from_slice(&src[i * c..(i + 1) * c]);
        }
        self.push(
            "gather_rows",
            Tensor::matrix(indices.len(), c, out)?,
            Op::Gather(table, indices.to_vec()),
        )
    }

    /// Mean over rows of `-log softmax(logits)[row, targets[row]]`.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, targets: &[usize]) -> Result<NodeId> {
        let (r, c) = self.dims(logits)?;
        if targets.len() != r || r == 0 {
            return Err(NumericsError::shape(
                "softmax_cross_entropy",
                format!("{} targets for {r} rows", targets.len()),
            ));
        }
        if let Some(&bad) = targets.iter().find(|&&t| t >= c) {
            return Err(NumericsError::usage(
                "softmax_cross_entropy",
                format!("class index {bad} out of range for {c} classes"),
            ));
        }
        let lv = self.value(logits);
        let mut probs = Vec::with_capacity(r * c);
        let mut loss = 0.0;
        for (row, &t) in lv.data().chunks(c).zip(targets) {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|&x| (x - max).exp()).sum();
            let log_z = max + sum.ln();
            loss += log_z - row[t];
            probs.extend(row.iter().map(|&x| (x - max).exp() / sum));
        }
        let probs = Tensor::matrix(r, c, probs)?;
        self.push(
            "softmax_cross_entropy",
            Tensor::scalar(loss / r as f64),
            Op::SoftmaxCrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
        )
    }

    /// Reverse pass from a scalar node. Gradients of parameters that did not
    /// contribute to `loss` are zero.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(NumericsError::usage(
                "backward",
                format!("loss must be scalar, shape is {:?}", self.value(loss).shape()),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = Vec::with_capacity(loss.0 + 1);
        grads.resize_with(loss.0 + 1, || None);
        grads[loss.0] = Some(Tensor::filled(self.value(loss).shape(), 1.0));
        let mut out = Gradients::zeros_like(self.params);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Constant => {}
                Op::Param(pid) => out.get_mut(*pid).add_assign(&g),
                Op::MatMul(a, b) => {
                    let (m, k) = self.value(*a).dims2()?;
                    let n = self.value(*b).cols();
                    let mut ga = vec![0.0; m * k];
                    gemm(m, n, k, g.data(), false, self.value(*b).data(), true, &mut ga, 0.0);
                    let mut gb = vec![0.0; k * n];
                    gemm(k, m, n, self.value(*a).data(), true, g.data(), false, &mut gb, 0.0);
                    accumulate(&mut grads, *a, Tensor::matrix(m, k, ga)?);
                    accumulate(&mut grads, *b, Tensor::matrix(k, n, gb)?);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *b, g.clone());
                    accumulate(&mut grads, *a, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, g.map(|x| -x));
                    accumulate(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = g.zip_map(self.value(*b), |x, y| x * y);
                    let gb = g.zip_map(self.value(*a), |x, y| x * y);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::AddRow(a, row) => {
                    let c = g.cols();
                    let mut gr = vec![0.0; c];
                    for chunk in g.data().chunks(c) {
                        for (s, x) in gr.iter_mut().zip(chunk) {
                            *s += x;
                        }
                    }
                    accumulate(&mut grads, *row, Tensor::row(gr));
                    accumulate(&mut grads, *a, g);
                }
                Op::MulCol(a, col) => {
                    let c = g.cols().max(1);
                    let av = self.value(*a);
                    let cv = self.value(*col).data();
                    let mut ga = g.clone();
                    let mut gc = vec![0.0; cv.len()];
                    for (i, chunk) in ga.data_mut().chunks_mut(c).enumerate() {
                        let arow = &av.data()[i * c..(i + 1) * c];
                        let mut s = 0.0;
                        for (x, a) in chunk.iter_mut().zip(arow) {
                            s += *x * a;
                            *x *= cv[i];
                        }
                        gc[i] = s;
                    }
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *col, Tensor::column(gc));
                }
                Op::Scale(a, f) => accumulate(&mut grads, *a, g.map(|x| x * f)),
                Op::Sigmoid(a) => {
                    let ga = g.zip_map(&node.value, |x, y| x * y * (1.0 - y));
                    accumulate(&mut grads, *a, ga);
                }
                Op::Tanh(a) => {
                    let ga = g.zip_map(&node.value, |x, y| x * (1.0 - y * y));
                    accumulate(&mut grads, *a, ga);
                }
                Op::Square(a) => {
                    let ga = g.zip_map(self.value(*a), |x, y| 2.0 * x * y);
                    accumulate(&mut grads, *a, ga);
                }
                Op::Sqrt(a) => {
                    let ga = g.zip_map(&node.value, |x, y| x / (2.0 * y));
                    if !ga.is_finite() {
                        return Err(NumericsError::NonFinite { op: "sqrt backward" });
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::ConcatCols(parts) => {
                    let total = g.cols();
                    let rows = g.rows();
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.value(p).cols();
                        let mut part = Vec::with_capacity(rows * w);
                        for i in 0..rows {
                            part.extend_from_slice(
                                &g.data()[i * total + offset..i * total + offset + w],
                            );
                        }
                        accumulate(&mut grads, p, Tensor::matrix(rows, w, part)?);
                        offset += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let cols = g.cols();
                    let mut offset = 0;
                    for &p in parts {
                        let r = self.value(p).rows();
                        let part = g.data()[offset * cols..(offset + r) * cols].to_vec();
                        accumulate(&mut grads, p, Tensor::matrix(r, cols, part)?);
                        offset += r;
                    }
                }
                Op::SliceCols(a, start) => {
                    let (r, c) = self.value(*a).dims2()?;
                    let w = g.cols();
                    let mut ga = vec![0.0; r * c];
                    for i in 0..r {
                        ga[i * c + start..i * c + start + w]
                            .copy_from_slice(&g.data()[i * w..(i + 1) * w]);
                    }
                    accumulate(&mut grads, *a, Tensor::matrix(r, c, ga)?);
                }
                Op::SumAll(a) => {
                    let s = g.data()[0];
                    accumulate(&mut grads, *a, Tensor::filled(self.value(*a).shape(), s));
                }
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let c = y.cols();
                    let mut ga = g.clone();
                    for (grow, yrow) in ga.data_mut().chunks_mut(c).zip(y.data().chunks(c)) {
                        let dot: f64 = grow.iter().zip(yrow).map(|(x, y)| x * y).sum();
                        for (x, y) in grow.iter_mut().zip(yrow) {
                            *x = y * (*x - dot);
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::Gather(table, indices) => {
                    let tv = self.value(*table);
                    let c = tv.cols();
                    let mut gt = Tensor::zeros(tv.shape());
                    for (row, &i) in indices.iter().enumerate() {
                        let dst = &mut gt.data_mut()[i * c..(i + 1) * c];
                        for (d, s) in dst.iter_mut().zip(&g.data()[row * c..(row + 1) * c]) {
                            *d += s;
                        }
                    }
                    accumulate(&mut grads, *table, gt);
                }
                Op::SoftmaxCrossEntropy {
                    logits,
                    targets,
                    probs,
                } => {
                    let r = targets.len();
                    let c = probs.cols();
                    let s = g.data()[0] / r as f64;
                    let mut gl = probs.clone();
                    for (i, &t) in targets.iter().enumerate() {
                        gl.data_mut()[i * c + t] -= 1.0;
                    }
                    gl.scale_assign(s);
                    accumulate(&mut grads, *logits, gl);
                }
            }
        }
        Ok(out)
    }
}

fn accumulate(grads: &mut [Option<Tensor>], id: NodeId, g: Tensor) {
    match &mut grads[id.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
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

/// Row-wise softmax of a rank-2 tensor, computed with max subtraction.
pub fn softmax_rows(t: &Tensor) -> Result<Tensor> {
    let (r, c) = t.dims2()?;
    let mut out = Vec::with_capacity(r * c);
    for row in t.data().chunks(c.max(1)) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|&x| (x - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        out.extend(exps.into_iter().map(|e| e / sum));
    }
    Tensor::matrix(r, c, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(values: &[(&str, Tensor)]) -> ParamStore {
        let mut s = ParamStore::new();
        for (n, v) in values {
            s.add(*n, v.clone()).unwrap();
        }
        s
    }

    #[test]
    fn square_gradient_at_three() {
        let store = store_with(&[("x", Tensor::scalar(3.0))]);
        let x = store.id("x").unwrap();
        let mut g = Graph::new(&store);
        let xn = g.param(x).unwrap();
        let y = g.square(xn).unwrap();
        let grads = g.backward(y).unwrap();
        assert_eq!(g.value(y).item().unwrap(), 9.0);
        assert_eq!(grads.get(x).item().unwrap(), 6.0);
    }

    #[test]
    fn product_plus_x_gradient() {
        let store = store_with(&[("x", Tensor::scalar(2.0)), ("y", Tensor::scalar(5.0))]);
        let (x, y) = (store.id("x").unwrap(), store.id("y").unwrap());
        let mut g = Graph::new(&store);
        let xn = g.param(x).unwrap();
        let yn = g.param(y).unwrap();
        let xy = g.mul(xn, yn).unwrap();
        let f = g.add(xy, xn).unwrap();
        let grads = g.backward(f).unwrap();
        assert_eq!(grads.get(x).item().unwrap(), 6.0);
        assert_eq!(grads.get(y).item().unwrap(), 2.0);
    }

    #[test]
    fn unused_parameters_get_zero_gradient() {
        let store = store_with(&[
            ("a", Tensor::scalar(1.5)),
            ("unused", Tensor::row(vec![1.0, 2.0])),
        ]);
        let mut g = Graph::new(&store);
        let a = g.param(store.id("a").unwrap()).unwrap();
        let l = g.square(a).unwrap();
        let grads = g.backward(l).unwrap();
        assert_eq!(grads.get(store.id("unused").unwrap()).data(), &[0.0, 0.0]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let store = store_with(&[("a", Tensor::row(vec![1.0, 2.0]))]);
        let mut g = Graph::new(&store);
        let a = g.param(store.id("a").unwrap()).unwrap();
        let err = g.backward(a).unwrap_err();
        assert!(matches!(err, NumericsError::Usage { .. }));
    }

    #[test]
    fn backward_adds_no_nodes() {
        let store = store_with(&[("a", Tensor::row(vec![0.3, -0.2]))]);
        let mut g = Graph::new(&store);
        let a = g.param(store.id("a").unwrap()).unwrap();
        let t = g.tanh(a).unwrap();
        let s = g.sum_all(t).unwrap();
        let before = g.len();
        g.backward(s).unwrap();
        assert_eq!(g.len(), before);
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let c = g.constant(Tensor::scalar(1e300)).unwrap();
        let err = g.square(c).unwrap_err();
        assert!(err.is_numeric());
    }

    #[test]
    fn softmax_sums_to_one_and_is_shift_invariant() {
        let t = Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, -5.0, 0.0, 5.0]).unwrap();
        let s = softmax_rows(&t).unwrap();
        for row in s.data().chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let shifted = softmax_rows(&t.map(|x| x + 123.456)).unwrap();
        for (a, b) in s.data().iter().zip(shifted.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_uniform_is_ln_k() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let logits = g.constant(Tensor::matrix(1, 7, vec![0.25; 7]).unwrap()).unwrap();
        let l = g.softmax_cross_entropy(logits, &[3]).unwrap();
        assert!((g.value(l).item().unwrap() - 7f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_confident_is_near_zero() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let logits = g
            .constant(Tensor::matrix(1, 4, vec![0.0, 1000.0, 0.0, 0.0]).unwrap())
            .unwrap();
        let l = g.softmax_cross_entropy(logits, &[1]).unwrap();
        assert!(g.value(l).item().unwrap() < 1e-6);
    }

    #[test]
    fn cross_entropy_gradient_is_softmax_minus_one_hot() {
        let logits = Tensor::matrix(1, 4, vec![0.1, -0.7, 1.3, 0.2]).unwrap();
        let store = store_with(&[("z", logits.clone())]);
        let z = store.id("z").unwrap();
        let mut g = Graph::new(&store);
        let zn = g.param(z).unwrap();
        let l = g.softmax_cross_entropy(zn, &[2]).unwrap();
        let grads = g.backward(l).unwrap();
        let p = softmax_rows(&logits).unwrap();
        for (j, (&gv, &pv)) in grads.get(z).data().iter().zip(p.data()).enumerate() {
            let expect = pv - if j == 2 { 1.0 } else { 0.0 };
            assert!((gv - expect).abs() < 1e-14);
        }
        // central differences
        let h = 1e-6;
        for j in 0..4 {
            let f = |delta: f64| {
                let mut t = logits.clone();
                t.data_mut()[j] += delta;
                let s = softmax_rows(&t).unwrap();
                -s.data()[2].ln()
            };
            let fd = (f(h) - f(-h)) / (2.0 * h);
            assert!((fd - grads.get(z).data()[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn cross_entropy_rejects_bad_class() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let logits = g.constant(Tensor::matrix(1, 3, vec![0.0; 3]).unwrap()).unwrap();
        assert!(matches!(
            g.softmax_cross_entropy(logits, &[3]),
            Err(NumericsError::Usage { .. })
        ));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let a = g.constant(Tensor::zeros(&[2, 3])).unwrap();
        let b = g.constant(Tensor::zeros(&[2, 3])).unwrap();
        assert!(matches!(g.matmul(a, b), Err(NumericsError::Shape { .. })));
    }
}
