use std::sync::Arc;

use super::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Index of a parameter in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub usize);

/// Named trainable tensors in declaration order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore<S> {
    names: Vec<String>,
    tensors: Vec<Tensor<S>>,
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        ParamStore {
            names: Vec::new(),
            tensors: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<S>) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(value);
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<S> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<S> {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn tensors(&self) -> &[Tensor<S>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<S>] {
        &mut self.tensors
    }

    pub fn num_values(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }
}

#[derive(Debug, Clone)]
enum Op<S> {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    /// Same shape, or the right operand a single row broadcast down.
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// `mul * x + add`.
    Affine(Var, S, S),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    RepeatRows(Var, usize),
    /// `out[i][j] = a[i] + b[j]` for column vectors `a` and `b`.
    OuterSum(Var, Var),
    Relu(Var),
    LeakyRelu(Var, S),
    Sigmoid(Var),
    Tanh(Var),
    SoftmaxRows(Var),
    Mse(Var, Arc<Tensor<S>>),
}

#[derive(Debug, Clone)]
struct Node<S> {
    value: Tensor<S>,
    op: Op<S>,
}

/// Records a forward computation for one backward pass.
#[derive(Debug, Clone, Default)]
pub struct Tape<S> {
    nodes: Vec<Node<S>>,
}

/// Gradients of one backward pass, per recorded value.
#[derive(Debug, Clone)]
pub struct Gradients<S> {
    grads: Vec<Option<Tensor<S>>>,
    params: Vec<Option<ParamId>>,
}

impl<S: Scalar> Gradients<S> {
    pub fn of(&self, v: Var) -> Option<&Tensor<S>> {
        self.grads[v.0].as_ref()
    }

    /// Gradients summed per parameter, zero for parameters not reached.
    pub fn for_params(&self, store: &ParamStore<S>) -> Vec<Tensor<S>> {
        let mut out: Vec<Tensor<S>> = store
            .tensors()
            .iter()
            .map(|t| Tensor::zeros(t.rows(), t.cols()))
            .collect();
        for (g, p) in self.grads.iter().zip(&self.params) {
            if let (Some(g), Some(p)) = (g, p) {
                out[p.0].add_assign(g);
            }
        }
        out
    }
}

fn shape_err(op: &'static str, a: (usize, usize), b: (usize, usize)) -> Error {
    Error::Shape {
        op,
        left: a,
        right: b,
    }
}

fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    /// A constant input.
    pub fn leaf(&mut self, value: Tensor<S>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn param(&mut self, store: &ParamStore<S>, id: ParamId) -> Var {
        self.push(store.get(id).clone(), Op::Param(id))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul(self.value(b))?;
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    fn zip(&self, op: &'static str, a: Var, b: Var, f: impl Fn(S, S) -> S) -> Result<Tensor<S>> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(shape_err(op, x.shape(), y.shape()));
        }
        let data = x.data().iter().zip(y.data()).map(|(&p, &q)| f(p, q)).collect();
        Tensor::from_vec(x.rows(), x.cols(), data)
    }

    /// Elementwise sum; `b` may also be a single row added to every row of `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        let v = if x.shape() == y.shape() {
            self.zip("add", a, b, |p, q| p + q)?
        } else if y.rows() == 1 && y.cols() == x.cols() {
            let cols = x.cols();
            let data = x
                .data()
                .iter()
                .enumerate()
                .map(|(i, &p)| p + y.data()[i % cols])
                .collect();
            Tensor::from_vec(x.rows(), cols, data)?
        } else {
            return Err(shape_err("add", x.shape(), y.shape()));
        };
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip("sub", a, b, |p, q| p - q)?;
        Ok(self.push(v, Op::Sub(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.zip("mul", a, b, |p, q| p * q)?;
        Ok(self.push(v, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, s: S) -> Var {
        self.affine(a, s, S::zero())
    }

    /// `mul * x + add`, elementwise.
    pub fn affine(&mut self, a: Var, mul: S, add: S) -> Var {
        let v = self.value(a).map(|x| mul * x + add);
        self.push(v, Op::Affine(a, mul, add))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.value(parts[0]).rows();
        let mut cols = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.0 != rows {
                return Err(shape_err("concat_cols", self.shape(parts[0]), s));
            }
            cols += s.1;
        }
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut c0 = 0;
            for &p in parts {
                let src = self.value(p).row_slice(r);
                out.data_mut()[r * cols + c0..r * cols + c0 + src.len()].copy_from_slice(src);
                c0 += src.len();
            }
        }
        Ok(self.push(out, Op::ConcatCols(parts.to_vec())))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = self.value(parts[0]).cols();
        let mut data = Vec::new();
        for &p in parts {
            let t = self.value(p);
            if t.cols() != cols {
                return Err(shape_err("concat_rows", self.shape(parts[0]), t.shape()));
            }
            data.extend_from_slice(t.data());
        }
        let rows = data.len() / cols.max(1);
        let v = Tensor::from_vec(rows, cols, data)?;
        Ok(self.push(v, Op::ConcatRows(parts.to_vec())))
    }

    /// Repeats every row `n` times in place: row `r` of the input becomes
    /// rows `r * n .. (r + 1) * n` of the output.
    pub fn repeat_rows(&mut self, a: Var, n: usize) -> Result<Var> {
        let x = self.value(a);
        let mut data = Vec::with_capacity(x.len() * n);
        for r in 0..x.rows() {
            for _ in 0..n {
                data.extend_from_slice(x.row_slice(r));
            }
        }
        let v = Tensor::from_vec(x.rows() * n, x.cols(), data)?;
        Ok(self.push(v, Op::RepeatRows(a, n)))
    }

    pub fn outer_sum(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.cols() != 1 || y.cols() != 1 {
            return Err(shape_err("outer_sum", x.shape(), y.shape()));
        }
        let (n, m) = (x.rows(), y.rows());
        let mut data = Vec::with_capacity(n * m);
        for &p in x.data() {
            data.extend(y.data().iter().map(|&q| p + q));
        }
        let v = Tensor::from_vec(n, m, data)?;
        Ok(self.push(v, Op::OuterSum(a, b)))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.max(S::zero()));
        self.push(v, Op::Relu(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: S) -> Var {
        let v = self.value(a).map(|x| if x > S::zero() { x } else { x * slope });
        self.push(v, Op::LeakyRelu(a, slope))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).map(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.tanh());
        self.push(v, Op::Tanh(a))
    }

    /// Row-wise softmax. With a mask, `false` entries get probability zero;
    /// every row must keep at least one entry.
    pub fn softmax_rows(&mut self, a: Var, mask: Option<Arc<Vec<bool>>>) -> Result<Var> {
        let x = self.value(a);
        let (rows, cols) = x.shape();
        if let Some(m) = &mask {
            if m.len() != rows * cols {
                return Err(shape_err("softmax_rows", x.shape(), (m.len(), 1)));
            }
        }
        let keep = |i: usize| mask.as_ref().map_or(true, |m| m[i]);
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let base = r * cols;
            let mut max = S::neg_infinity();
            let mut kept = 0;
            for c in 0..cols {
                if keep(base + c) {
                    let v = x.data()[base + c];
                    if !v.is_finite() {
                        return Err(Error::Divergence(format!("non-finite softmax input in row {r}")));
                    }
                    max = max.max(v);
                    kept += 1;
                }
            }
            if kept == 0 {
                return Err(Error::Argument(format!("softmax row {r} is fully masked")));
            }
            let mut sum = S::zero();
            for c in 0..cols {
                if keep(base + c) {
                    let e = (x.data()[base + c] - max).exp();
                    out.data_mut()[base + c] = e;
                    sum += e;
                }
            }
            for c in 0..cols {
                out.data_mut()[base + c] /= sum;
            }
        }
        Ok(self.push(out, Op::SoftmaxRows(a)))
    }

    /// Mean squared difference to a constant target, as a `1 x 1` value.
    pub fn mse(&mut self, pred: Var, target: Tensor<S>) -> Result<Var> {
        let x = self.value(pred);
        if x.shape() != target.shape() {
            return Err(shape_err("mse", x.shape(), target.shape()));
        }
        let n = S::of(x.len() as f64);
        let s: S = x
            .data()
            .iter()
            .zip(target.data())
            .map(|(&p, &t)| (p - t) * (p - t))
            .sum();
        Ok(self.push(Tensor::scalar(s / n), Op::Mse(pred, Arc::new(target))))
    }

    /// Reverse pass from a `1 x 1` output.
    pub fn backward(&self, out: Var) -> Result<Gradients<S>> {
        if self.shape(out) != (1, 1) {
            return Err(shape_err("backward", self.shape(out), (1, 1)));
        }
        let mut grads: Vec<Option<Tensor<S>>> = vec![None; self.nodes.len()];
        grads[out.0] = Some(Tensor::scalar(S::one()));
        for i in (0..=out.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads)?;
            grads[i] = Some(g);
        }
        Ok(Gradients {
            grads,
            params: self
                .nodes
                .iter()
                .map(|n| match n.op {
                    Op::Param(p) => Some(p),
                    _ => None,
                })
                .collect(),
        })
    }

    fn propagate(&self, i: usize, g: &Tensor<S>, grads: &mut [Option<Tensor<S>>]) -> Result<()> {
        let node = &self.nodes[i];
        let mut acc = |v: Var, d: Tensor<S>| match &mut grads[v.0] {
            Some(t) => t.add_assign(&d),
            slot @ None => *slot = Some(d),
        };
        let unary = |a: Var, f: &dyn Fn(S, S, S) -> S| {
            // f(input, output, upstream grad)
            let x = self.value(a);
            let data = x
                .data()
                .iter()
                .zip(node.value.data())
                .zip(g.data())
                .map(|((&xi, &yi), &gi)| f(xi, yi, gi))
                .collect();
            Tensor::from_vec(x.rows(), x.cols(), data).expect("same shape")
        };
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let da = g.matmul_t(false, self.value(*b), true)?;
                let db = self.value(*a).matmul_t(true, g, false)?;
                acc(*a, da);
                acc(*b, db);
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                if self.shape(*b) == g.shape() {
                    acc(*b, g.clone());
                } else {
                    let mut db = Tensor::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (d, &v) in db.data_mut().iter_mut().zip(g.row_slice(r)) {
                            *d += v;
                        }
                    }
                    acc(*b, db);
                }
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, g.map(|v| -v));
            }
            Op::Mul(a, b) => {
                let (x, y) = (self.value(*a), self.value(*b));
                let da = Tensor::from_vec(
                    g.rows(),
                    g.cols(),
                    g.data().iter().zip(y.data()).map(|(&p, &q)| p * q).collect(),
                )?;
                let db = Tensor::from_vec(
                    g.rows(),
                    g.cols(),
                    g.data().iter().zip(x.data()).map(|(&p, &q)| p * q).collect(),
                )?;
                acc(*a, da);
                acc(*b, db);
            }
            Op::Affine(a, s, _) => acc(*a, g.map(|v| v * *s)),
            Op::ConcatCols(parts) => {
                let mut c0 = 0;
                for &p in parts {
                    let (rows, cols) = self.shape(p);
                    let mut d = Tensor::zeros(rows, cols);
                    for r in 0..rows {
                        d.data_mut()[r * cols..(r + 1) * cols]
                            .copy_from_slice(&g.row_slice(r)[c0..c0 + cols]);
                    }
                    c0 += cols;
                    acc(p, d);
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for &p in parts {
                    let (rows, cols) = self.shape(p);
                    let d = Tensor::from_vec(rows, cols, g.data()[off..off + rows * cols].to_vec())?;
                    off += rows * cols;
                    acc(p, d);
                }
            }
            Op::RepeatRows(a, n) => {
                let (rows, cols) = self.shape(*a);
                let mut d = Tensor::zeros(rows, cols);
                for r in 0..g.rows() {
                    let dst = r / n;
                    for (t, &v) in d.data_mut()[dst * cols..(dst + 1) * cols]
                        .iter_mut()
                        .zip(g.row_slice(r))
                    {
                        *t += v;
                    }
                }
                acc(*a, d);
            }
            Op::OuterSum(a, b) => {
                let (n, m) = g.shape();
                let mut da = Tensor::zeros(n, 1);
                let mut db = Tensor::zeros(m, 1);
                for r in 0..n {
                    for (c, &v) in g.row_slice(r).iter().enumerate() {
                        da.data_mut()[r] += v;
                        db.data_mut()[c] += v;
                    }
                }
                acc(*a, da);
                acc(*b, db);
            }
            Op::Relu(a) => {
                let d = unary(*a, &|x, _, gi| if x > S::zero() { gi } else { S::zero() });
                acc(*a, d);
            }
            Op::LeakyRelu(a, slope) => {
                let s = *slope;
                let d = unary(*a, &|x, _, gi| if x > S::zero() { gi } else { gi * s });
                acc(*a, d);
            }
            Op::Sigmoid(a) => {
                let d = unary(*a, &|_, y, gi| gi * y * (S::one() - y));
                acc(*a, d);
            }
            Op::Tanh(a) => {
                let d = unary(*a, &|_, y, gi| gi * (S::one() - y * y));
                acc(*a, d);
            }
            Op::SoftmaxRows(a) => {
                let y = &node.value;
                let (rows, cols) = y.shape();
                let mut d = Tensor::zeros(rows, cols);
                for r in 0..rows {
                    let yr = y.row_slice(r);
                    let gr = g.row_slice(r);
                    let dot: S = yr.iter().zip(gr).map(|(&p, &q)| p * q).sum();
                    for c in 0..cols {
                        d.data_mut()[r * cols + c] = yr[c] * (gr[c] - dot);
                    }
                }
                acc(*a, d);
            }
            Op::Mse(p, target) => {
                let x = self.value(*p);
                let k = g.item() * S::of(2.0) / S::of(x.len() as f64);
                let data = x
                    .data()
                    .iter()
                    .zip(target.data())
                    .map(|(&a, &t)| k * (a - t))
                    .collect();
                acc(*p, Tensor::from_vec(x.rows(), x.cols(), data)?);
            }
        }
        Ok(())
    }
}
