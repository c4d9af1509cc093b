use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op<T> {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, T),
    Sum(Var),
    Mean(Var),
    Transpose(Var),
    Reshape(Var),
    Concat {
        inputs: Vec<Var>,
        axis: usize,
    },
    Slice {
        input: Var,
        axis: usize,
        start: usize,
    },
    Embedding {
        table: Var,
        ids: Vec<usize>,
    },
    Tanh(Var),
    Sigmoid(Var),
    Gelu(Var),
    Softmax {
        input: Var,
        axis: usize,
    },
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<T>,
        rstd: Vec<T>,
    },
    SquaredError(Var, Var),
}

#[derive(Debug)]
struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Define-by-run recording of primitive operations.
///
/// Nodes are appended in execution order, so the node list is always a valid
/// topological order and [`Tape::backward`] simply walks it in reverse.
#[derive(Debug)]
pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    check_finite: bool,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// `(outer, dim, inner)` decomposition of `shape` around `axis`.
fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

impl<T: Scalar> Tape<T> {
    /// Finite-value checking defaults to on in debug builds.
    pub fn new() -> Self {
        Self::with_finite_checks(cfg!(debug_assertions))
    }

    pub fn with_finite_checks(check_finite: bool) -> Self {
        Self {
            nodes: Vec::new(),
            check_finite,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Leaf whose gradient is tracked.
    pub fn param(&mut self, value: Tensor<T>) -> Var {
        self.push_leaf(value, true)
    }

    /// Leaf excluded from differentiation.
    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.push_leaf(value, false)
    }

    fn push_leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, name: &str, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Result<Var> {
        if self.check_finite && !value.is_finite() {
            return Err(Error::Numeric {
                op: name.to_string(),
                step: None,
            });
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let (m, k) = av.dims2()?;
        let (k2, n) = bv.dims2()?;
        if k != k2 {
            return Err(Error::dim("matmul", av.shape(), bv.shape()));
        }
        let mut out = vec![T::zero(); m * n];
        T::gemm(
            m,
            k,
            n,
            av.data(),
            k as isize,
            1,
            bv.data(),
            n as isize,
            1,
            T::zero(),
            &mut out,
        );
        let value = Tensor::new([m, n], out)?;
        self.push("matmul", value, Op::MatMul(a, b), &[a, b])
    }

    fn check_broadcast(&self, op: &'static str, a: Var, b: Var) -> Result<usize> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sb.len() > sa.len() || sa[sa.len() - sb.len()..] != *sb {
            return Err(Error::dim(op, sa, sb));
        }
        Ok(self.value(b).len())
    }

    /// Element-wise sum; `b` may match a trailing suffix of `a`'s shape and
    /// is then broadcast over the leading dimensions.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let blen = self.check_broadcast("add", a, b)?;
        let (av, bv) = (self.value(a), self.value(b));
        let data = av
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| x + bv.data()[i % blen])
            .collect();
        let value = Tensor::new(av.shape().to_vec(), data)?;
        self.push("add", value, Op::Add(a, b), &[a, b])
    }

    /// Element-wise product with the same broadcasting rule as [`Tape::add`].
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let blen = self.check_broadcast("mul", a, b)?;
        let (av, bv) = (self.value(a), self.value(b));
        let data = av
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| x * bv.data()[i % blen])
            .collect();
        let value = Tensor::new(av.shape().to_vec(), data)?;
        self.push("mul", value, Op::Mul(a, b), &[a, b])
    }

    pub fn scale(&mut self, a: Var, c: T) -> Result<Var> {
        let value = self.value(a).map(|x| x * c);
        self.push("scale", value, Op::Scale(a, c), &[a])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self
            .value(a)
            .data()
            .iter()
            .fold(T::zero(), |acc, &x| acc + x);
        self.push("sum", Tensor::scalar(s), Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        if av.is_empty() {
            return Err(Error::Contract("mean of an empty tensor".into()));
        }
        let n = T::of(av.len() as f64);
        let s = av.data().iter().fold(T::zero(), |acc, &x| acc + x) / n;
        self.push("mean", Tensor::scalar(s), Op::Mean(a), &[a])
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let av = self.value(a);
        let (r, c) = av.dims2()?;
        let mut out = vec![T::zero(); r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = av.data()[i * c + j];
            }
        }
        let value = Tensor::new([c, r], out)?;
        self.push("transpose", value, Op::Transpose(a), &[a])
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let av = self.value(a);
        if shape.iter().product::<usize>() != av.len() {
            return Err(Error::dim("reshape", av.shape(), shape));
        }
        let value = Tensor::new(shape.to_vec(), av.data().to_vec())?;
        self.push("reshape", value, Op::Reshape(a), &[a])
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let first = inputs
            .first()
            .ok_or_else(|| Error::Contract("concat of zero tensors".into()))?;
        let base = self.shape(*first).to_vec();
        if axis >= base.len() {
            return Err(Error::Contract(format!(
                "concat axis {axis} out of range for shape {base:?}"
            )));
        }
        let mut total = 0;
        for &v in inputs {
            let s = self.shape(v);
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(d, (x, y))| d == axis || x == y);
            if !compatible {
                return Err(Error::dim("concat", &base, s));
            }
            total += s[axis];
        }
        let mut shape = base.clone();
        shape[axis] = total;
        let (outer, _, inner) = split_axis(&shape, axis);
        let mut out = Vec::with_capacity(shape.iter().product());
        for o in 0..outer {
            for &v in inputs {
                let val = self.value(v);
                let block = val.shape()[axis] * inner;
                out.extend_from_slice(&val.data()[o * block..(o + 1) * block]);
            }
        }
        let value = Tensor::new(shape, out)?;
        self.push(
            "concat",
            value,
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
            inputs,
        )
    }

    /// Contiguous range `start..start + len` along `axis`.
    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let av = self.value(a);
        let shape = av.shape();
        if axis >= shape.len() || start + len > shape[axis] {
            return Err(Error::Contract(format!(
                "slice {start}..{} on axis {axis} out of range for shape {shape:?}",
                start + len
            )));
        }
        let (outer, dim, inner) = split_axis(shape, axis);
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = o * dim * inner + start * inner;
            out.extend_from_slice(&av.data()[base..base + len * inner]);
        }
        let mut new_shape = shape.to_vec();
        new_shape[axis] = len;
        let value = Tensor::new(new_shape, out)?;
        self.push(
            "slice",
            value,
            Op::Slice {
                input: a,
                axis,
                start,
            },
            &[a],
        )
    }

    /// Rows of `table` (`[vocab × dim]`) selected by `ids`, giving `[ids.len() × dim]`.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let tv = self.value(table);
        let (vocab, dim) = tv.dims2()?;
        let mut out = Vec::with_capacity(ids.len() * dim);
        for &id in ids {
            if id >= vocab {
                return Err(Error::Contract(format!(
                    "embedding id {id} out of range for vocabulary of {vocab}"
                )));
            }
            out.extend_from_slice(&tv.data()[id * dim..(id + 1) * dim]);
        }
        let value = Tensor::new([ids.len(), dim], out)?;
        self.push(
            "embedding",
            value,
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
            &[table],
        )
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(|x| x.tanh());
        self.push("tanh", value, Op::Tanh(a), &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let value = self.value(a).map(sigmoid);
        self.push("sigmoid", value, Op::Sigmoid(a), &[a])
    }

    /// Tanh approximation of GELU.
    pub fn gelu(&mut self, a: Var) -> Result<Var> {
        let (c, k) = (T::of(GELU_C), T::of(GELU_A));
        let half = T::of(0.5);
        let value = self
            .value(a)
            .map(|x| half * x * (T::one() + (c * (x + k * x * x * x)).tanh()));
        self.push("gelu", value, Op::Gelu(a), &[a])
    }

    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let av = self.value(a);
        if axis >= av.rank() {
            return Err(Error::Contract(format!(
                "softmax axis {axis} out of range for shape {:?}",
                av.shape()
            )));
        }
        let (outer, dim, inner) = split_axis(av.shape(), axis);
        let src = av.data();
        let mut out = vec![T::zero(); src.len()];
        for o in 0..outer {
            for i in 0..inner {
                let idx = |d: usize| o * dim * inner + d * inner + i;
                let max = (0..dim)
                    .map(|d| src[idx(d)])
                    .fold(T::neg_infinity(), T::max);
                let mut total = T::zero();
                for d in 0..dim {
                    let e = (src[idx(d)] - max).exp();
                    out[idx(d)] = e;
                    total = total + e;
                }
                for d in 0..dim {
                    out[idx(d)] = out[idx(d)] / total;
                }
            }
        }
        let value = Tensor::new(av.shape().to_vec(), out)?;
        self.push("softmax", value, Op::Softmax { input: a, axis }, &[a])
    }

    /// Normalizes over the last axis, then applies `gamma` and `beta`.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let xv = self.value(x);
        let d = *xv
            .shape()
            .last()
            .ok_or_else(|| Error::Contract("layer_norm on a scalar".into()))?;
        for p in [gamma, beta] {
            if self.shape(p) != [d] {
                return Err(Error::dim("layer_norm", self.shape(x), self.shape(p)));
            }
        }
        let rows = xv.len() / d.max(1);
        let dn = T::of(d as f64);
        let eps = T::of(eps);
        let (g, b) = (self.value(gamma).data(), self.value(beta).data());
        let mut xhat = vec![T::zero(); xv.len()];
        let mut rstd = vec![T::zero(); rows];
        let mut out = vec![T::zero(); xv.len()];
        for r in 0..rows {
            let row = &xv.data()[r * d..(r + 1) * d];
            let mu = row.iter().fold(T::zero(), |s, &v| s + v) / dn;
            let var = row.iter().fold(T::zero(), |s, &v| s + (v - mu) * (v - mu)) / dn;
            let rs = T::one() / (var + eps).sqrt();
            rstd[r] = rs;
            for j in 0..d {
                let h = (row[j] - mu) * rs;
                xhat[r * d + j] = h;
                out[r * d + j] = h * g[j] + b[j];
            }
        }
        let value = Tensor::new(xv.shape().to_vec(), out)?;
        self.push(
            "layer_norm",
            value,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            },
            &[x, gamma, beta],
        )
    }

    /// Mean over all elements of `(a - b)^2`.
    pub fn squared_error(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::dim("squared_error", av.shape(), bv.shape()));
        }
        if av.is_empty() {
            return Err(Error::Contract("squared_error of empty tensors".into()));
        }
        let s = av
            .data()
            .iter()
            .zip(bv.data())
            .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y));
        let value = Tensor::scalar(s / T::of(av.len() as f64));
        self.push("squared_error", value, Op::SquaredError(a, b), &[a, b])
    }

    /// `a - b`, composed from `scale` and `add`.
    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let neg = self.scale(b, -T::one())?;
        self.add(a, neg)
    }

    /// `x W + b` for `x: [n × in]`, `W: [in × out]`, `b: [out]`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xw = self.matmul(x, w)?;
        self.add(xw, b)
    }

    /// Reverse pass from a single-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::Contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(vec![T::one()]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if node.requires_grad {
                self.propagate(node, &g, &mut grads);
            }
            grads[idx] = Some(g);
        }

        let out = grads
            .into_iter()
            .zip(&self.nodes)
            .map(|(g, n)| {
                g.filter(|_| n.requires_grad)
                    .map(|g| Tensor::new(n.value.shape().to_vec(), g).expect("grad shape"))
            })
            .collect();
        Ok(Gradients { grads: out })
    }

    fn buf<'g>(&self, grads: &'g mut [Option<Vec<T>>], v: Var) -> Option<&'g mut Vec<T>> {
        if !self.nodes[v.0].requires_grad {
            return None;
        }
        let len = self.nodes[v.0].value.len();
        Some(grads[v.0].get_or_insert_with(|| vec![T::zero(); len]))
    }

    fn propagate(&self, node: &Node<T>, g: &[T], grads: &mut [Option<Vec<T>>]) {
        let val = |v: Var| self.nodes[v.0].value.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.value(*a).dims2().expect("matmul lhs");
                let n = self.value(*b).shape()[1];
                let (ad, bd) = (val(*a), val(*b));
                if let Some(ga) = self.buf(grads, *a) {
                    // dA = G B^T
                    T::gemm(m, n, k, g, n as isize, 1, bd, 1, n as isize, T::one(), ga);
                }
                if let Some(gb) = self.buf(grads, *b) {
                    // dB = A^T G
                    T::gemm(k, m, n, ad, 1, k as isize, g, n as isize, 1, T::one(), gb);
                }
            }
            Op::Add(a, b) => {
                let blen = self.value(*b).len();
                if let Some(ga) = self.buf(grads, *a) {
                    ga.iter_mut().zip(g).for_each(|(x, &y)| *x = *x + y);
                }
                if let Some(gb) = self.buf(grads, *b) {
                    for (i, &y) in g.iter().enumerate() {
                        gb[i % blen] = gb[i % blen] + y;
                    }
                }
            }
            Op::Mul(a, b) => {
                let blen = self.value(*b).len();
                let (ad, bd) = (val(*a), val(*b));
                if let Some(ga) = self.buf(grads, *a) {
                    for (i, &y) in g.iter().enumerate() {
                        ga[i] = ga[i] + y * bd[i % blen];
                    }
                }
                if let Some(gb) = self.buf(grads, *b) {
                    for (i, &y) in g.iter().enumerate() {
                        gb[i % blen] = gb[i % blen] + y * ad[i];
                    }
                }
            }
            Op::Scale(a, c) => {
                if let Some(ga) = self.buf(grads, *a) {
                    ga.iter_mut().zip(g).for_each(|(x, &y)| *x = *x + y * *c);
                }
            }
            Op::Sum(a) => {
                if let Some(ga) = self.buf(grads, *a) {
                    ga.iter_mut().for_each(|x| *x = *x + g[0]);
                }
            }
            Op::Mean(a) => {
                if let Some(ga) = self.buf(grads, *a) {
                    let share = g[0] / T::of(ga.len() as f64);
                    ga.iter_mut().for_each(|x| *x = *x + share);
                }
            }
            Op::Transpose(a) => {
                let (r, c) = self.value(*a).dims2().expect("transpose input");
                if let Some(ga) = self.buf(grads, *a) {
                    for i in 0..r {
                        for j in 0..c {
                            ga[i * c + j] = ga[i * c + j] + g[j * r + i];
                        }
                    }
                }
            }
            Op::Reshape(a) => {
                if let Some(ga) = self.buf(grads, *a) {
                    ga.iter_mut().zip(g).for_each(|(x, &y)| *x = *x + y);
                }
            }
            Op::Concat { inputs, axis } => {
                let (outer, total, inner) = split_axis(node.value.shape(), *axis);
                let mut offset = 0;
                for &v in inputs {
                    let width = self.shape(v)[*axis];
                    if let Some(gv) = self.buf(grads, v) {
                        for o in 0..outer {
                            let src = o * total * inner + offset * inner;
                            let dst = o * width * inner;
                            for e in 0..width * inner {
                                gv[dst + e] = gv[dst + e] + g[src + e];
                            }
                        }
                    }
                    offset += width;
                }
            }
            Op::Slice { input, axis, start } => {
                let (outer, dim, inner) = split_axis(self.shape(*input), *axis);
                let len = node.value.shape()[*axis];
                if let Some(ga) = self.buf(grads, *input) {
                    for o in 0..outer {
                        let dst = o * dim * inner + start * inner;
                        let src = o * len * inner;
                        for e in 0..len * inner {
                            ga[dst + e] = ga[dst + e] + g[src + e];
                        }
                    }
                }
            }
            Op::Embedding { table, ids } => {
                let dim = self.shape(*table)[1];
                if let Some(gt) = self.buf(grads, *table) {
                    for (row, &id) in ids.iter().enumerate() {
                        for e in 0..dim {
                            gt[id * dim + e] = gt[id * dim + e] + g[row * dim + e];
                        }
                    }
                }
            }
            Op::Tanh(a) => {
                let y = node.value.data();
                if let Some(ga) = self.buf(grads, *a) {
                    for i in 0..g.len() {
                        ga[i] = ga[i] + g[i] * (T::one() - y[i] * y[i]);
                    }
                }
            }
            Op::Sigmoid(a) => {
                let y = node.value.data();
                if let Some(ga) = self.buf(grads, *a) {
                    for i in 0..g.len() {
                        ga[i] = ga[i] + g[i] * y[i] * (T::one() - y[i]);
                    }
                }
            }
            Op::Gelu(a) => {
                let x = val(*a);
                let (c, k) = (T::of(GELU_C), T::of(GELU_A));
                let half = T::of(0.5);
                let three_k = T::of(3.0 * GELU_A);
                if let Some(ga) = self.buf(grads, *a) {
                    for i in 0..g.len() {
                        let xi = x[i];
                        let th = (c * (xi + k * xi * xi * xi)).tanh();
                        let d = half * (T::one() + th)
                            + half * xi * (T::one() - th * th) * c * (T::one() + three_k * xi * xi);
                        ga[i] = ga[i] + g[i] * d;
                    }
                }
            }
            Op::Softmax { input, axis } => {
                let (outer, dim, inner) = split_axis(node.value.shape(), *axis);
                let y = node.value.data();
                if let Some(ga) = self.buf(grads, *input) {
                    for o in 0..outer {
                        for i in 0..inner {
                            let idx = |d: usize| o * dim * inner + d * inner + i;
                            let dot = (0..dim).fold(T::zero(), |s, d| s + g[idx(d)] * y[idx(d)]);
                            for d in 0..dim {
                                let j = idx(d);
                                ga[j] = ga[j] + y[j] * (g[j] - dot);
                            }
                        }
                    }
                }
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            } => {
                let d = self.shape(*gamma)[0];
                let rows = rstd.len();
                let gam = val(*gamma);
                if let Some(gg) = self.buf(grads, *gamma) {
                    for r in 0..rows {
                        for j in 0..d {
                            gg[j] = gg[j] + g[r * d + j] * xhat[r * d + j];
                        }
                    }
                }
                if let Some(gb) = self.buf(grads, *beta) {
                    for r in 0..rows {
                        for j in 0..d {
                            gb[j] = gb[j] + g[r * d + j];
                        }
                    }
                }
                if let Some(gx) = self.buf(grads, *x) {
                    let dn = T::of(d as f64);
                    for r in 0..rows {
                        let base = r * d;
                        let mut sum_gh = T::zero();
                        let mut sum_gh_xh = T::zero();
                        for j in 0..d {
                            let gh = g[base + j] * gam[j];
                            sum_gh = sum_gh + gh;
                            sum_gh_xh = sum_gh_xh + gh * xhat[base + j];
                        }
                        for j in 0..d {
                            let gh = g[base + j] * gam[j];
                            let v = rstd[r] / dn * (dn * gh - sum_gh - xhat[base + j] * sum_gh_xh);
                            gx[base + j] = gx[base + j] + v;
                        }
                    }
                }
            }
            Op::SquaredError(a, b) => {
                let (ad, bd) = (val(*a), val(*b));
                let factor = T::of(2.0) * g[0] / T::of(ad.len() as f64);
                if let Some(ga) = self.buf(grads, *a) {
                    for i in 0..ad.len() {
                        ga[i] = ga[i] + factor * (ad[i] - bd[i]);
                    }
                }
                if let Some(gb) = self.buf(grads, *b) {
                    for i in 0..ad.len() {
                        gb[i] = gb[i] - factor * (ad[i] - bd[i]);
                    }
                }
            }
        }
    }
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// `None` when `v` does not require grad or does not reach the loss.
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient of `v`, with zeros when the loss does not depend on it.
    pub fn wrt(&self, tape: &Tape<T>, v: Var) -> Tensor<T> {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(tape.shape(v).to_vec()))
    }
}
