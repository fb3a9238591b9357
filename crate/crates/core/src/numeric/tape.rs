//! Reverse-mode differentiation over dense tensors.
//!
//! Every operation appends a node to the [`Tape`] holding its value and the
//! ids of its inputs. Nodes are appended after their inputs, so the node
//! order is a topological order and [`Tape::backward`] is a single reverse
//! sweep.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numeric::tensor::{softmax_rows, Tensor};
use crate::scalar::Scalar;

/// Handle to a node on a tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    Minimum(usize, usize),
    Maximum(usize, usize),
    Scale(usize, T),
    AddScalar(usize),
    AddRow(usize, usize),
    MulRows(usize, usize),
    MulScalar(usize, usize),
    MatMul(usize, usize),
    Transpose(usize),
    Relu(usize),
    Sigmoid(usize),
    Tanh(usize),
    Exp(usize),
    Ln(usize),
    Recip(usize),
    Softmax(usize),
    CrossEntropy { logits: usize, target: usize },
    Concat { inputs: Vec<usize>, axis: usize },
    Sum(usize),
    Mean(usize),
    SumRows(usize),
    MaxAll { input: usize, index: usize },
    GatherRows { input: usize, rows: Vec<usize> },
    Reshape(usize),
    Slice { input: usize, start: usize },
}

struct Node<T> {
    value: Arc<Tensor<T>>,
    op: Op<T>,
    requires_grad: bool,
}

/// Operation record for one forward computation.
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    consumed: bool,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, var: Var) -> Option<&Tensor<T>> {
        self.grads.get(var.0).and_then(Option::as_ref)
    }

    /// Gradient of `var`, or zeros shaped like `like` when the loss does
    /// not depend on it.
    pub fn get_or_zeros(&self, var: Var, like: &Tensor<T>) -> Tensor<T> {
        self.get(var).cloned().unwrap_or_else(|| Tensor::zeros(like.shape()))
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), consumed: false }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Clears all records so the tape can be reused.
    pub fn reset(&mut self) {
        self.nodes.clear();
        self.consumed = false;
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        self.push_arc(Arc::new(value), op, requires_grad)
    }

    fn push_arc(&mut self, value: Arc<Tensor<T>>, op: Op<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, ids: &[usize]) -> bool {
        ids.iter().any(|&i| self.nodes[i].requires_grad)
    }

    /// Differentiable leaf.
    pub fn var(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Differentiable leaf sharing storage with a parameter.
    pub fn param(&mut self, value: Arc<Tensor<T>>) -> Var {
        self.push_arc(value, Op::Leaf, true)
    }

    /// Non-differentiable leaf.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    fn binary_same(
        &mut self,
        a: Var,
        b: Var,
        f: impl Fn(T, T) -> T,
        op: Op<T>,
    ) -> Result<Var> {
        let out = self.value(a).zip_map(self.value(b), f)?;
        let rg = self.rg(&[a.0, b.0]);
        Ok(self.push(out, op, rg))
    }

    fn unary(&mut self, a: Var, f: impl Fn(T) -> T, op: Op<T>) -> Var {
        let out = self.value(a).map(f);
        let rg = self.rg(&[a.0]);
        self.push(out, op, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same(a, b, |x, y| x + y, Op::Add(a.0, b.0))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same(a, b, |x, y| x - y, Op::Sub(a.0, b.0))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same(a, b, |x, y| x * y, Op::Mul(a.0, b.0))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same(a, b, |x, y| x / y, Op::Div(a.0, b.0))
    }

    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same(a, b, |x, y| x.min(y), Op::Minimum(a.0, b.0))
    }

    pub fn maximum(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same(a, b, |x, y| x.max(y), Op::Maximum(a.0, b.0))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        self.unary(a, |x| x * c, Op::Scale(a.0, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: T) -> Var {
        self.unary(a, |x| x + c, Op::AddScalar(a.0))
    }

    /// `[n, d] + [1, d]`, the row added to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (n, d) = self.value(a).dims2()?;
        let (r1, d2) = self.value(row).dims2()?;
        if r1 != 1 || d2 != d {
            return Err(Error::shape(format!("add_row [{n},{d}] + [{r1},{d2}]")));
        }
        let rv = self.value(row).data().to_vec();
        let mut out = self.value(a).clone();
        for chunk in out.data_mut().chunks_mut(d) {
            for (o, &b) in chunk.iter_mut().zip(&rv) {
                *o += b;
            }
        }
        let rg = self.rg(&[a.0, row.0]);
        Ok(self.push(out, Op::AddRow(a.0, row.0), rg))
    }

    /// `[n, d] * [n, 1]`, row `i` of `a` scaled by `s[i]`.
    pub fn mul_rows(&mut self, a: Var, s: Var) -> Result<Var> {
        let (n, d) = self.value(a).dims2()?;
        let (n2, c) = self.value(s).dims2()?;
        if n2 != n || c != 1 {
            return Err(Error::shape(format!("mul_rows [{n},{d}] * [{n2},{c}]")));
        }
        let sv = self.value(s).data().to_vec();
        let mut out = self.value(a).clone();
        if d > 0 {
            for (chunk, &k) in out.data_mut().chunks_mut(d).zip(&sv) {
                for o in chunk.iter_mut() {
                    *o *= k;
                }
            }
        }
        let rg = self.rg(&[a.0, s.0]);
        Ok(self.push(out, Op::MulRows(a.0, s.0), rg))
    }

    /// Every element of `a` times the single-element tensor `s`.
    pub fn mul_scalar(&mut self, a: Var, s: Var) -> Result<Var> {
        let k = self.value(s).item()?;
        let out = self.value(a).scale(k);
        let rg = self.rg(&[a.0, s.0]);
        Ok(self.push(out, Op::MulScalar(a.0, s.0), rg))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(&[a.0, b.0]);
        Ok(self.push(out, Op::MatMul(a.0, b.0), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).transpose()?;
        let rg = self.rg(&[a.0]);
        Ok(self.push(out, Op::Transpose(a.0), rg))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.max(T::zero()), Op::Relu(a.0))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, |x| T::one() / (T::one() + (-x).exp()), Op::Sigmoid(a.0))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.tanh(), Op::Tanh(a.0))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.exp(), Op::Exp(a.0))
    }

    pub fn ln(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.ln(), Op::Ln(a.0))
    }

    pub fn recip(&mut self, a: Var) -> Var {
        self.unary(a, |x| T::one() / x, Op::Recip(a.0))
    }

    /// Softmax over the last axis (each row of a matrix).
    pub fn softmax(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let cols = t.shape().last().copied().unwrap_or(1);
        let out = Tensor::new(t.shape().to_vec(), softmax_rows(t.data(), cols))
            .expect("softmax preserves shape");
        let rg = self.rg(&[a.0]);
        self.push(out, Op::Softmax(a.0), rg)
    }

    /// `-log softmax(logits)[target]` for a single row of logits.
    pub fn cross_entropy(&mut self, logits: Var, target: usize) -> Result<Var> {
        let t = self.value(logits);
        let rows = match t.shape() {
            [_] => 1,
            [r, _] => *r,
            s => return Err(Error::shape(format!("cross_entropy on shape {s:?}"))),
        };
        if rows != 1 {
            return Err(Error::shape("cross_entropy expects one row of logits"));
        }
        let v = t.data();
        if target >= v.len() {
            return Err(Error::invalid(format!("target {target} outside {} classes", v.len())));
        }
        let max = v.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
        let lse = v.iter().map(|&x| (x - max).exp()).sum::<T>().ln() + max;
        let out = Tensor::scalar(lse - v[target]);
        let rg = self.rg(&[logits.0]);
        Ok(self.push(out, Op::CrossEntropy { logits: logits.0, target }, rg))
    }

    /// Concatenates matrices along `axis` (0 = rows, 1 = columns).
    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        if inputs.is_empty() || axis > 1 {
            return Err(Error::invalid("concat needs inputs and axis 0 or 1"));
        }
        let dims: Vec<(usize, usize)> =
            inputs.iter().map(|v| self.value(*v).dims2()).collect::<Result<_>>()?;
        let out = if axis == 0 {
            let cols = dims[0].1;
            if dims.iter().any(|d| d.1 != cols) {
                return Err(Error::shape(format!("concat rows {dims:?}")));
            }
            let mut data = Vec::new();
            for v in inputs {
                data.extend_from_slice(self.value(*v).data());
            }
            Tensor::new(vec![data.len() / cols.max(1), cols], data)?
        } else {
            let rows = dims[0].0;
            if dims.iter().any(|d| d.0 != rows) {
                return Err(Error::shape(format!("concat cols {dims:?}")));
            }
            let total: usize = dims.iter().map(|d| d.1).sum();
            let mut data = Vec::with_capacity(rows * total);
            for r in 0..rows {
                for v in inputs {
                    data.extend_from_slice(self.value(*v).row_slice(r));
                }
            }
            Tensor::new(vec![rows, total], data)?
        };
        let ids: Vec<usize> = inputs.iter().map(|v| v.0).collect();
        let rg = self.rg(&ids);
        Ok(self.push(out, Op::Concat { inputs: ids, axis }, rg))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).sum());
        let rg = self.rg(&[a.0]);
        self.push(out, Op::Sum(a.0), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let n = T::from_usize_lossy(t.numel().max(1));
        let out = Tensor::scalar(t.sum() / n);
        let rg = self.rg(&[a.0]);
        self.push(out, Op::Mean(a.0), rg)
    }

    /// Column sums: `[n, d] -> [1, d]`.
    pub fn sum_rows(&mut self, a: Var) -> Result<Var> {
        let (n, d) = self.value(a).dims2()?;
        let t = self.value(a);
        let mut out = vec![T::zero(); d];
        for r in 0..n {
            for (o, &v) in out.iter_mut().zip(t.row_slice(r)) {
                *o += v;
            }
        }
        let rg = self.rg(&[a.0]);
        Ok(self.push(Tensor::row(out), Op::SumRows(a.0), rg))
    }

    /// Largest element; the gradient flows to the first maximal entry.
    pub fn max_all(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.numel() == 0 {
            return Err(Error::invalid("max of empty tensor"));
        }
        let mut index = 0;
        for (i, &v) in t.data().iter().enumerate() {
            if v > t.data()[index] {
                index = i;
            }
        }
        let out = Tensor::scalar(t.data()[index]);
        let rg = self.rg(&[a.0]);
        Ok(self.push(out, Op::MaxAll { input: a.0, index }, rg))
    }

    /// Selects rows of a matrix (embedding lookup).
    pub fn gather_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        let (n, d) = self.value(a).dims2()?;
        let t = self.value(a);
        let mut data = Vec::with_capacity(rows.len() * d);
        for &r in rows {
            if r >= n {
                return Err(Error::invalid(format!("row {r} out of {n}")));
            }
            data.extend_from_slice(t.row_slice(r));
        }
        let out = Tensor::new(vec![rows.len(), d], data)?;
        let rg = self.rg(&[a.0]);
        Ok(self.push(out, Op::GatherRows { input: a.0, rows: rows.to_vec() }, rg))
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        let out = self.value(a).reshaped(shape)?;
        let rg = self.rg(&[a.0]);
        Ok(self.push(out, Op::Reshape(a.0), rg))
    }

    /// Contiguous range of the flattened data, reshaped to `shape`.
    pub fn slice(&mut self, a: Var, start: usize, shape: Vec<usize>) -> Result<Var> {
        let len: usize = shape.iter().product();
        let t = self.value(a);
        if start + len > t.numel() {
            return Err(Error::shape(format!("slice {start}+{len} of {}", t.numel())));
        }
        let out = Tensor::new(shape, t.data()[start..start + len].to_vec())?;
        let rg = self.rg(&[a.0]);
        Ok(self.push(out, Op::Slice { input: a.0, start }, rg))
    }

    /// Reverse accumulation from a single-element `loss`.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients<T>> {
        if self.consumed {
            return Err(Error::invalid("tape already consumed by a backward pass; reset it first"));
        }
        if !self.value(loss).is_scalar() {
            return Err(Error::invalid(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        self.consumed = true;
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::full(self.value(loss).shape(), T::one()));

        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, idx: usize, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) -> Result<()> {
        let out = &self.nodes[idx].value;
        let val = |i: usize| -> &Tensor<T> { &self.nodes[i].value };
        let mut acc = |i: usize, delta: Tensor<T>| -> Result<()> {
            if !self.nodes[i].requires_grad {
                return Ok(());
            }
            match &mut grads[i] {
                Some(existing) => existing.add_assign(&delta),
                slot @ None => {
                    *slot = Some(delta);
                    Ok(())
                }
            }
        };
        match &self.nodes[idx].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                acc(*a, g.clone())?;
                acc(*b, g.clone())?;
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone())?;
                acc(*b, g.scale(-T::one()))?;
            }
            Op::Mul(a, b) => {
                acc(*a, g.mul(val(*b))?)?;
                acc(*b, g.mul(val(*a))?)?;
            }
            Op::Div(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                acc(*a, g.zip_map(vb, |gi, bi| gi / bi)?)?;
                let gb: Vec<T> = g
                    .data()
                    .iter()
                    .zip(va.data())
                    .zip(vb.data())
                    .map(|((&gi, &ai), &bi)| -gi * ai / (bi * bi))
                    .collect();
                acc(*b, Tensor::new(vb.shape().to_vec(), gb)?)?;
            }
            Op::Minimum(a, b) | Op::Maximum(a, b) => {
                let is_min = matches!(self.nodes[idx].op, Op::Minimum(..));
                let (va, vb) = (val(*a), val(*b));
                let mut ga = Tensor::zeros(va.shape());
                let mut gb = Tensor::zeros(vb.shape());
                for i in 0..g.numel() {
                    let pick_a = if is_min {
                        va.data()[i] <= vb.data()[i]
                    } else {
                        va.data()[i] >= vb.data()[i]
                    };
                    if pick_a {
                        ga.data_mut()[i] = g.data()[i];
                    } else {
                        gb.data_mut()[i] = g.data()[i];
                    }
                }
                acc(*a, ga)?;
                acc(*b, gb)?;
            }
            Op::Scale(a, c) => acc(*a, g.scale(*c))?,
            Op::AddScalar(a) => acc(*a, g.clone())?,
            Op::AddRow(a, row) => {
                acc(*a, g.clone())?;
                let (n, d) = g.dims2()?;
                let mut s = vec![T::zero(); d];
                for r in 0..n {
                    for (o, &v) in s.iter_mut().zip(g.row_slice(r)) {
                        *o += v;
                    }
                }
                acc(*row, Tensor::row(s))?;
            }
            Op::MulRows(a, s) => {
                let (va, vs) = (val(*a), val(*s));
                let (n, d) = va.dims2()?;
                let mut ga = g.clone();
                let mut gs = vec![T::zero(); n];
                for r in 0..n {
                    let k = vs.data()[r];
                    let grow = &g.data()[r * d..(r + 1) * d];
                    let arow = va.row_slice(r);
                    gs[r] = grow.iter().zip(arow).map(|(&x, &y)| x * y).sum();
                    for v in &mut ga.data_mut()[r * d..(r + 1) * d] {
                        *v *= k;
                    }
                }
                acc(*a, ga)?;
                acc(*s, Tensor::column(gs))?;
            }
            Op::MulScalar(a, s) => {
                let (va, vs) = (val(*a), val(*s));
                acc(*a, g.scale(vs.item()?))?;
                let gs: T = g.data().iter().zip(va.data()).map(|(&x, &y)| x * y).sum();
                acc(*s, Tensor::full(vs.shape(), gs))?;
            }
            Op::MatMul(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                if self.nodes[*a].requires_grad {
                    acc(*a, g.matmul(&vb.transpose()?)?)?;
                }
                if self.nodes[*b].requires_grad {
                    acc(*b, va.transpose()?.matmul(g)?)?;
                }
            }
            Op::Transpose(a) => acc(*a, g.transpose()?)?,
            Op::Relu(a) => {
                acc(*a, g.zip_map(val(*a), |gi, x| if x > T::zero() { gi } else { T::zero() })?)?
            }
            Op::Sigmoid(a) => acc(*a, g.zip_map(out, |gi, y| gi * y * (T::one() - y))?)?,
            Op::Tanh(a) => acc(*a, g.zip_map(out, |gi, y| gi * (T::one() - y * y))?)?,
            Op::Exp(a) => acc(*a, g.mul(out)?)?,
            Op::Ln(a) => acc(*a, g.zip_map(val(*a), |gi, x| gi / x)?)?,
            Op::Recip(a) => acc(*a, g.zip_map(out, |gi, y| -gi * y * y)?)?,
            Op::Softmax(a) => {
                let cols = out.shape().last().copied().unwrap_or(1).max(1);
                let mut ga = vec![T::zero(); out.numel()];
                for ((y, gr), dst) in out
                    .data()
                    .chunks(cols)
                    .zip(g.data().chunks(cols))
                    .zip(ga.chunks_mut(cols))
                {
                    let dot: T = y.iter().zip(gr).map(|(&yi, &gi)| yi * gi).sum();
                    for ((d, &yi), &gi) in dst.iter_mut().zip(y).zip(gr) {
                        *d = yi * (gi - dot);
                    }
                }
                acc(*a, Tensor::new(out.shape().to_vec(), ga)?)?;
            }
            Op::CrossEntropy { logits, target } => {
                let vl = val(*logits);
                let gs = g.item()?;
                let mut p = softmax_rows(vl.data(), vl.numel().max(1));
                p[*target] -= T::one();
                for v in p.iter_mut() {
                    *v *= gs;
                }
                acc(*logits, Tensor::new(vl.shape().to_vec(), p)?)?;
            }
            Op::Concat { inputs, axis } => {
                let (rows, total) = g.dims2()?;
                if *axis == 0 {
                    let mut offset = 0;
                    for &i in inputs {
                        let n = val(i).numel();
                        let piece = g.data()[offset..offset + n].to_vec();
                        acc(i, Tensor::new(val(i).shape().to_vec(), piece)?)?;
                        offset += n;
                    }
                } else {
                    let mut col = 0;
                    for &i in inputs {
                        let (_, c) = val(i).dims2()?;
                        let mut piece = Vec::with_capacity(rows * c);
                        for r in 0..rows {
                            piece.extend_from_slice(&g.data()[r * total + col..r * total + col + c]);
                        }
                        acc(i, Tensor::new(vec![rows, c], piece)?)?;
                        col += c;
                    }
                }
            }
            Op::Sum(a) => acc(*a, Tensor::full(val(*a).shape(), g.item()?))?,
            Op::Mean(a) => {
                let n = T::from_usize_lossy(val(*a).numel().max(1));
                acc(*a, Tensor::full(val(*a).shape(), g.item()? / n))?
            }
            Op::SumRows(a) => {
                let (n, _) = val(*a).dims2()?;
                let mut data = Vec::with_capacity(val(*a).numel());
                for _ in 0..n {
                    data.extend_from_slice(g.data());
                }
                acc(*a, Tensor::new(val(*a).shape().to_vec(), data)?)?;
            }
            Op::MaxAll { input, index } => {
                let mut ga = Tensor::zeros(val(*input).shape());
                ga.data_mut()[*index] = g.item()?;
                acc(*input, ga)?;
            }
            Op::GatherRows { input, rows } => {
                let vi = val(*input);
                let (_, d) = vi.dims2()?;
                let mut ga = Tensor::zeros(vi.shape());
                for (k, &r) in rows.iter().enumerate() {
                    for c in 0..d {
                        ga.data_mut()[r * d + c] += g.data()[k * d + c];
                    }
                }
                acc(*input, ga)?;
            }
            Op::Reshape(a) => acc(*a, g.reshaped(val(*a).shape().to_vec())?)?,
            Op::Slice { input, start } => {
                let mut ga = Tensor::zeros(val(*input).shape());
                ga.data_mut()[*start..*start + g.numel()].copy_from_slice(g.data());
                acc(*input, ga)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_at_three() {
        let mut tape = Tape::<f64>::new();
        let x = tape.var(Tensor::scalar(3.0));
        let y = tape.mul(x, x).unwrap();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.get(x).unwrap().item().unwrap(), 6.0);
    }

    #[test]
    fn constant_function_has_zero_gradient() {
        let mut tape = Tape::<f64>::new();
        let x = tape.var(Tensor::scalar(3.0));
        let c = tape.constant(Tensor::scalar(7.0));
        let zero = tape.scale(x, 0.0);
        let y = tape.add(zero, c).unwrap();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.get(x).unwrap().item().unwrap(), 0.0);
    }

    #[test]
    fn relu_of_negatives_has_zero_gradient() {
        let mut tape = Tape::<f64>::new();
        let x = tape.var(Tensor::row(vec![-1.0, -2.0, -0.5]));
        let r = tape.relu(x);
        let s = tape.sum(r);
        let g = tape.backward(s).unwrap();
        assert!(g.get(x).unwrap().data().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn non_scalar_loss_is_rejected() {
        let mut tape = Tape::<f64>::new();
        let x = tape.var(Tensor::row(vec![1.0, 2.0]));
        assert!(matches!(tape.backward(x), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn second_backward_needs_reset() {
        let mut tape = Tape::<f64>::new();
        let x = tape.var(Tensor::scalar(1.0));
        let y = tape.mul(x, x).unwrap();
        tape.backward(y).unwrap();
        assert!(tape.backward(y).is_err());
        tape.reset();
        assert!(tape.is_empty());
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::row(vec![0.0, 0.0, 0.0]));
        let p = tape.softmax(x);
        for v in tape.value(p).data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn cross_entropy_of_confident_correct_logits_is_zero() {
        let mut tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::row(vec![800.0, 0.0, 0.0]));
        let l = tape.cross_entropy(x, 0).unwrap();
        assert_eq!(tape.value(l).item().unwrap(), 0.0);
        let u = tape.constant(Tensor::row(vec![0.0, 0.0, 0.0]));
        let l = tape.cross_entropy(u, 2).unwrap();
        assert!((tape.value(l).item().unwrap() - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn shape_errors_surface() {
        let mut tape = Tape::<f64>::new();
        let a = tape.var(Tensor::zeros(&[2, 3]));
        let b = tape.var(Tensor::zeros(&[2, 2]));
        assert!(matches!(tape.add(a, b), Err(Error::ShapeMismatch(_))));
        assert!(tape.matmul(a, b).is_err());
        assert!(tape.matmul(b, a).is_ok());
    }
}
