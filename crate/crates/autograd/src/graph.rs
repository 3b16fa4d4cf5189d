//! Eagerly evaluated computation tape with reverse-mode gradients.
//!
//! Nodes are appended in evaluation order, so the tape is topologically
//! sorted by construction and `backward` is a single reverse sweep.
//! Parameters are read from a borrowed [`ParamStore`] and their gradients
//! are written to a separate [`Gradients`] buffer; many graphs may therefore
//! share one store across threads.

use rand::{Rng, RngCore};

use crate::kernels;
use crate::params::{Gradients, ParamId, ParamStore};
use crate::tensor::Tensor;
use crate::AutogradError;

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Concat(Vec<Var>),
    Slice { input: Var, offset: usize },
    Reshape(Var),
    ScaleRows(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Softmax(Var),
    LogSoftmax(Var),
    Gather { table: Var, index: usize },
    CrossEntropy { logits: Var, label: usize, probs: Vec<f64> },
    Sum(Var),
    Mean(Var),
    Cumsum(Var),
    GumbelSt { logits: Var, soft: Vec<f64>, temperature: f64 },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

pub struct Graph<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
}

fn mismatch(op: &'static str, a: &[usize], b: &[usize]) -> AutogradError {
    AutogradError::ShapeMismatch { op, left: a.to_vec(), right: b.to_vec() }
}

fn softmax_row(x: &[f64], out: &mut [f64]) {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for (o, &v) in out.iter_mut().zip(x) {
        *o = (v - max).exp();
        z += *o;
    }
    out.iter_mut().for_each(|o| *o /= z);
}

fn log_softmax_row(x: &[f64], out: &mut [f64]) {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    for (o, &v) in out.iter_mut().zip(x) {
        *o = v - lse;
    }
}

/// Softmax over a slice.
pub fn softmax(x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    softmax_row(x, &mut out);
    out
}

/// One draw from the standard Gumbel distribution.
pub fn sample_gumbel<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    -(-u.ln()).ln()
}

impl<'p> Graph<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Graph { store, nodes: Vec::new(), param_vars: vec![None; store.len()] }
    }

    pub fn store(&self) -> &'p ParamStore {
        self.store
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        match self.nodes[v.0].op {
            Op::Param(id) => self.store.value(id),
            _ => &self.nodes[v.0].value,
        }
    }

    fn data(&self, v: Var) -> &[f64] {
        self.value(v).data()
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let requires_grad = match op {
            Op::Param(_) => true,
            _ => inputs.iter().any(|&v| self.needs(v)),
        };
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    /// A value that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Constant, &[])
    }

    /// The node for a stored parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        let v = self.push(Tensor::default(), Op::Param(id), &[]);
        self.param_vars[id.0] = Some(v);
        v
    }

    /// Copy of `v` that blocks gradient flow.
    pub fn detach(&mut self, v: Var) -> Var {
        let value = self.value(v).clone();
        self.constant(value)
    }

    /// `[m, k] x [k]` or `[m, k] x [k, n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AutogradError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.is_empty() || sb.len() > 2 || sa[1] != sb[0] {
            return Err(mismatch("matmul", sa, sb));
        }
        let (m, k) = (sa[0], sa[1]);
        let value = if sb.len() == 1 {
            let mut out = vec![0.0; m];
            kernels::matvec(self.data(a), k, self.data(b), &mut out);
            Tensor::vector(out)
        } else {
            let n = sb[1];
            let mut out = vec![0.0; m * n];
            kernels::matmul(self.data(a), self.data(b), m, k, n, &mut out);
            Tensor::new(&[m, n], out)?
        };
        Ok(self.push(value, Op::MatMul(a, b), &[a, b]))
    }

    fn zip_same(&mut self, op: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Result<Tensor, AutogradError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa != sb {
            return Err(mismatch(op, sa, sb));
        }
        let data = self.data(a).iter().zip(self.data(b)).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(sa, data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutogradError> {
        let value = self.zip_same("add", a, b, |x, y| x + y)?;
        Ok(self.push(value, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AutogradError> {
        let value = self.zip_same("sub", a, b, |x, y| x - y)?;
        Ok(self.push(value, Op::Sub(a, b), &[a, b]))
    }

    /// Elementwise product; a one-element operand broadcasts over the other.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutogradError> {
        let (la, lb) = (self.value(a).len(), self.value(b).len());
        let value = if self.shape(a) == self.shape(b) {
            self.zip_same("mul", a, b, |x, y| x * y)?
        } else if la == 1 {
            let s = self.data(a)[0];
            Tensor::new(self.shape(b), self.data(b).iter().map(|y| s * y).collect())?
        } else if lb == 1 {
            let s = self.data(b)[0];
            Tensor::new(self.shape(a), self.data(a).iter().map(|x| x * s).collect())?
        } else {
            return Err(mismatch("mul", self.shape(a), self.shape(b)));
        };
        Ok(self.push(value, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let t = self.value(a);
        let value = Tensor::new(t.shape(), t.data().iter().map(|x| x * s).collect()).expect("same shape");
        self.push(value, Op::Scale(a, s), &[a])
    }

    /// `W x + b`
    pub fn affine(&mut self, w: Var, x: Var, b: Var) -> Result<Var, AutogradError> {
        let wx = self.matmul(w, x)?;
        self.add(wx, b)
    }

    /// Concatenation along the first axis.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, AutogradError> {
        let Some(&first) = parts.first() else {
            return Err(mismatch("concat", &[], &[]));
        };
        let tail = self.shape(first).get(1..).unwrap_or(&[]).to_vec();
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let s = self.shape(p);
            if s.is_empty() || s[1..] != tail[..] {
                return Err(mismatch("concat", self.shape(first), s));
            }
            rows += s[0];
            data.extend_from_slice(self.data(p));
        }
        let mut shape = vec![rows];
        shape.extend(tail);
        let value = Tensor::new(&shape, data)?;
        Ok(self.push(value, Op::Concat(parts.to_vec()), parts))
    }

    /// Rows `start..start + len` along the first axis.
    pub fn slice(&mut self, input: Var, start: usize, len: usize) -> Result<Var, AutogradError> {
        let s = self.shape(input).to_vec();
        if s.is_empty() || start + len > s[0] {
            return Err(mismatch("slice", &s, &[start, len]));
        }
        let stride: usize = s[1..].iter().product();
        let offset = start * stride;
        let mut shape = s.clone();
        shape[0] = len;
        let value = Tensor::new(&shape, self.data(input)[offset..offset + len * stride].to_vec())?;
        Ok(self.push(value, Op::Slice { input, offset }, &[input]))
    }

    /// Same data under a new shape with equal element count.
    pub fn reshape(&mut self, input: Var, shape: &[usize]) -> Result<Var, AutogradError> {
        let t = self.value(input);
        let value = Tensor::new(shape, t.data().to_vec()).map_err(|_| mismatch("reshape", t.shape(), shape))?;
        Ok(self.push(value, Op::Reshape(input), &[input]))
    }

    /// Multiplies row `i` of a `[m, n]` matrix by `s[i]`.
    pub fn scale_rows(&mut self, x: Var, s: Var) -> Result<Var, AutogradError> {
        let (sx, ss) = (self.shape(x), self.shape(s));
        if sx.len() != 2 || ss.len() != 1 || sx[0] != ss[0] {
            return Err(mismatch("scale_rows", sx, ss));
        }
        let cols = sx[1];
        let mut out = self.data(x).to_vec();
        for (row, &k) in out.chunks_exact_mut(cols.max(1)).zip(self.data(s)) {
            row.iter_mut().for_each(|v| *v *= k);
        }
        let value = Tensor::new(sx, out)?;
        Ok(self.push(value, Op::ScaleRows(x, s), &[x, s]))
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let t = self.value(a);
        let value = Tensor::new(t.shape(), t.data().iter().map(|&x| f(x)).collect()).expect("same shape");
        self.push(value, op, &[a])
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, |x| 1.0 / (1.0 + (-x).exp()), Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, f64::tanh, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.map(a, |x| x.max(0.0), Op::Relu(a))
    }

    fn rowwise(&mut self, a: Var, f: fn(&[f64], &mut [f64]), op: Op) -> Result<Var, AutogradError> {
        let t = self.value(a);
        let Some(&cols) = t.shape().last() else {
            return Err(mismatch("softmax", t.shape(), &[]));
        };
        if cols == 0 {
            return Err(mismatch("softmax", t.shape(), &[]));
        }
        let mut out = vec![0.0; t.len()];
        for (x, o) in t.data().chunks_exact(cols).zip(out.chunks_exact_mut(cols)) {
            f(x, o);
        }
        let value = Tensor::new(t.shape(), out)?;
        Ok(self.push(value, op, &[a]))
    }

    /// Softmax along the last axis.
    pub fn softmax(&mut self, a: Var) -> Result<Var, AutogradError> {
        self.rowwise(a, softmax_row, Op::Softmax(a))
    }

    /// Log-softmax along the last axis.
    pub fn log_softmax(&mut self, a: Var) -> Result<Var, AutogradError> {
        self.rowwise(a, log_softmax_row, Op::LogSoftmax(a))
    }

    /// Row `index` of a `[rows, cols]` table.
    pub fn gather(&mut self, table: Var, index: usize) -> Result<Var, AutogradError> {
        let s = self.shape(table);
        if s.len() != 2 || index >= s[0] {
            return Err(AutogradError::IndexOutOfRange { index, len: s.first().copied().unwrap_or(0) });
        }
        let cols = s[1];
        let value = Tensor::vector(self.data(table)[index * cols..(index + 1) * cols].to_vec());
        Ok(self.push(value, Op::Gather { table, index }, &[table]))
    }

    /// Negative log-likelihood of `label` under `softmax(logits)`.
    pub fn cross_entropy(&mut self, logits: Var, label: usize) -> Result<Var, AutogradError> {
        let t = self.value(logits);
        if t.rank() != 1 || label >= t.len() {
            return Err(AutogradError::IndexOutOfRange { index: label, len: t.len() });
        }
        let probs = softmax(t.data());
        let mut logp = vec![0.0; t.len()];
        log_softmax_row(t.data(), &mut logp);
        let value = Tensor::scalar(-logp[label]);
        Ok(self.push(value, Op::CrossEntropy { logits, label, probs }, &[logits]))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.data(a).iter().sum());
        self.push(value, Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let d = self.data(a);
        let value = Tensor::scalar(d.iter().sum::<f64>() / d.len() as f64);
        self.push(value, Op::Mean(a), &[a])
    }

    /// Inclusive prefix sums of a vector.
    pub fn cumsum(&mut self, a: Var) -> Result<Var, AutogradError> {
        let t = self.value(a);
        if t.rank() != 1 {
            return Err(mismatch("cumsum", t.shape(), &[]));
        }
        let mut acc = 0.0;
        let out = t.data().iter().map(|x| {
            acc += x;
            acc
        });
        let value = Tensor::vector(out.collect());
        Ok(self.push(value, Op::Cumsum(a), &[a]))
    }

    /// Straight-through Gumbel-softmax: the forward value is the one-hot
    /// argmax of `(logits + g) / temperature` with Gumbel noise `g` (zero when
    /// `rng` is `None`); the backward pass uses the gradient of the soft
    /// sample.
    pub fn gumbel_softmax_st(
        &mut self,
        logits: Var,
        temperature: f64,
        rng: Option<&mut (dyn RngCore + '_)>,
    ) -> Result<Var, AutogradError> {
        if !(temperature > 0.0) {
            return Err(AutogradError::NonPositiveTemperature(temperature));
        }
        let t = self.value(logits);
        if t.rank() != 1 || t.is_empty() {
            return Err(mismatch("gumbel_softmax_st", t.shape(), &[]));
        }
        let perturbed: Vec<f64> = match rng {
            Some(rng) => t.data().iter().map(|l| (l + sample_gumbel(rng)) / temperature).collect(),
            None => t.data().iter().map(|l| l / temperature).collect(),
        };
        let soft = softmax(&perturbed);
        let mut hard = vec![0.0; soft.len()];
        hard[Tensor::vector(perturbed).argmax()] = 1.0;
        let value = Tensor::vector(hard);
        Ok(self.push(value, Op::GumbelSt { logits, soft, temperature }, &[logits]))
    }

    /// Gradients of a one-element `loss` with respect to every parameter.
    pub fn backward(&self, loss: Var) -> Result<Gradients, AutogradError> {
        let mut grads = Gradients::for_store(self.store);
        self.backward_into(loss, &mut grads)?;
        Ok(grads)
    }

    /// Like [`Graph::backward`] but adds into existing buffers.
    pub fn backward_into(&self, loss: Var, out: &mut Gradients) -> Result<(), AutogradError> {
        if self.value(loss).len() != 1 {
            return Err(AutogradError::NonScalarLoss(self.shape(loss).to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let y = node.value.data();
            macro_rules! acc {
                ($v:expr) => {{
                    let v: Var = $v;
                    if self.needs(v) {
                        let len = self.value(v).len();
                        Some(grads[v.0].get_or_insert_with(|| vec![0.0; len]))
                    } else {
                        None
                    }
                }};
            }
            match &node.op {
                Op::Constant => {}
                Op::Param(id) => {
                    let buf = out.buf_mut(*id, g.len());
                    buf.iter_mut().zip(&g).for_each(|(d, s)| *d += s);
                }
                Op::MatMul(a, b) => {
                    let (a, b) = (*a, *b);
                    let sa = self.shape(a);
                    let (m, k) = (sa[0], sa[1]);
                    if self.shape(b).len() == 1 {
                        if let Some(da) = acc!(a) {
                            kernels::outer_acc(da, k, &g, self.data(b));
                        }
                        if let Some(db) = acc!(b) {
                            kernels::matvec_t_acc(self.data(a), k, &g, db);
                        }
                    } else {
                        let n = self.shape(b)[1];
                        if let Some(da) = acc!(a) {
                            let bd = self.data(b);
                            for r in 0..m {
                                for p in 0..k {
                                    da[r * k + p] += kernels::dot(&g[r * n..(r + 1) * n], &bd[p * n..(p + 1) * n]);
                                }
                            }
                        }
                        if let Some(db) = acc!(b) {
                            let ad = self.data(a);
                            for r in 0..m {
                                for p in 0..k {
                                    kernels::axpy(&mut db[p * n..(p + 1) * n], ad[r * k + p], &g[r * n..(r + 1) * n]);
                                }
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    for v in [*a, *b] {
                        if let Some(d) = acc!(v) {
                            d.iter_mut().zip(&g).for_each(|(d, s)| *d += s);
                        }
                    }
                }
                Op::Sub(a, b) => {
                    if let Some(d) = acc!(*a) {
                        d.iter_mut().zip(&g).for_each(|(d, s)| *d += s);
                    }
                    if let Some(d) = acc!(*b) {
                        d.iter_mut().zip(&g).for_each(|(d, s)| *d -= s);
                    }
                }
                Op::Mul(a, b) => {
                    let (a, b) = (*a, *b);
                    for (this, other) in [(a, b), (b, a)] {
                        let other_data = self.data(other).to_vec();
                        let this_len = self.value(this).len();
                        if let Some(d) = acc!(this) {
                            if this_len == g.len() && other_data.len() == g.len() {
                                for ((d, gi), o) in d.iter_mut().zip(&g).zip(&other_data) {
                                    *d += gi * o;
                                }
                            } else if this_len == 1 && this_len != g.len() {
                                // broadcast operand: gradient sums over the other's elements
                                d[0] += g.iter().zip(&other_data).map(|(gi, o)| gi * o).sum::<f64>();
                            } else {
                                let s = other_data[0];
                                d.iter_mut().zip(&g).for_each(|(d, gi)| *d += gi * s);
                            }
                        }
                    }
                }
                Op::Scale(a, s) => {
                    if let Some(d) = acc!(*a) {
                        d.iter_mut().zip(&g).for_each(|(d, gi)| *d += s * gi);
                    }
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = self.value(p).len();
                        if let Some(d) = acc!(p) {
                            d.iter_mut().zip(&g[offset..offset + len]).for_each(|(d, s)| *d += s);
                        }
                        offset += len;
                    }
                }
                Op::Slice { input, offset } => {
                    if let Some(d) = acc!(*input) {
                        d[*offset..*offset + g.len()].iter_mut().zip(&g).for_each(|(d, s)| *d += s);
                    }
                }
                Op::Reshape(a) => {
                    if let Some(d) = acc!(*a) {
                        d.iter_mut().zip(&g).for_each(|(d, s)| *d += s);
                    }
                }
                Op::ScaleRows(x, s) => {
                    let (x, s) = (*x, *s);
                    let cols = self.shape(x)[1].max(1);
                    if let Some(dx) = acc!(x) {
                        let sd = self.data(s);
                        for ((d, gr), k) in dx.chunks_exact_mut(cols).zip(g.chunks_exact(cols)).zip(sd) {
                            kernels::axpy(d, *k, gr);
                        }
                    }
                    if let Some(ds) = acc!(s) {
                        let xd = self.data(x);
                        for ((d, gr), xr) in ds.iter_mut().zip(g.chunks_exact(cols)).zip(xd.chunks_exact(cols)) {
                            *d += kernels::dot(gr, xr);
                        }
                    }
                }
                Op::Sigmoid(a) => {
                    if let Some(d) = acc!(*a) {
                        for ((d, gi), yi) in d.iter_mut().zip(&g).zip(y) {
                            *d += gi * yi * (1.0 - yi);
                        }
                    }
                }
                Op::Tanh(a) => {
                    if let Some(d) = acc!(*a) {
                        for ((d, gi), yi) in d.iter_mut().zip(&g).zip(y) {
                            *d += gi * (1.0 - yi * yi);
                        }
                    }
                }
                Op::Relu(a) => {
                    if let Some(d) = acc!(*a) {
                        for ((d, gi), yi) in d.iter_mut().zip(&g).zip(y) {
                            if *yi > 0.0 {
                                *d += gi;
                            }
                        }
                    }
                }
                Op::Softmax(a) => {
                    let cols = *node.value.shape().last().unwrap();
                    if let Some(d) = acc!(*a) {
                        for ((d, gr), yr) in d.chunks_exact_mut(cols).zip(g.chunks_exact(cols)).zip(y.chunks_exact(cols)) {
                            let inner = kernels::dot(gr, yr);
                            for ((d, gi), yi) in d.iter_mut().zip(gr).zip(yr) {
                                *d += yi * (gi - inner);
                            }
                        }
                    }
                }
                Op::LogSoftmax(a) => {
                    let cols = *node.value.shape().last().unwrap();
                    if let Some(d) = acc!(*a) {
                        for ((d, gr), yr) in d.chunks_exact_mut(cols).zip(g.chunks_exact(cols)).zip(y.chunks_exact(cols)) {
                            let total: f64 = gr.iter().sum();
                            for ((d, gi), yi) in d.iter_mut().zip(gr).zip(yr) {
                                *d += gi - yi.exp() * total;
                            }
                        }
                    }
                }
                Op::Gather { table, index } => {
                    let cols = g.len();
                    if let Some(d) = acc!(*table) {
                        d[index * cols..(index + 1) * cols].iter_mut().zip(&g).for_each(|(d, s)| *d += s);
                    }
                }
                Op::CrossEntropy { logits, label, probs } => {
                    if let Some(d) = acc!(*logits) {
                        for (j, (d, p)) in d.iter_mut().zip(probs).enumerate() {
                            let target = if j == *label { 1.0 } else { 0.0 };
                            *d += g[0] * (p - target);
                        }
                    }
                }
                Op::Sum(a) => {
                    if let Some(d) = acc!(*a) {
                        d.iter_mut().for_each(|d| *d += g[0]);
                    }
                }
                Op::Mean(a) => {
                    if let Some(d) = acc!(*a) {
                        let n = d.len() as f64;
                        d.iter_mut().for_each(|d| *d += g[0] / n);
                    }
                }
                Op::Cumsum(a) => {
                    if let Some(d) = acc!(*a) {
                        let mut running = 0.0;
                        for (d, gi) in d.iter_mut().zip(&g).rev() {
                            running += gi;
                            *d += running;
                        }
                    }
                }
                Op::GumbelSt { logits, soft, temperature } => {
                    if let Some(d) = acc!(*logits) {
                        let inner = kernels::dot(&g, soft);
                        for ((d, gi), si) in d.iter_mut().zip(&g).zip(soft) {
                            *d += si * (gi - inner) / temperature;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn store_with(values: &[(&str, Tensor)]) -> (ParamStore, Vec<ParamId>) {
        let mut s = ParamStore::new();
        let ids = values.iter().map(|(n, t)| s.add(*n, t.clone())).collect();
        (s, ids)
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let s = ParamStore::new();
        let mut g = Graph::new(&s);
        let z = g.constant(Tensor::zeros(&[10]));
        let p = g.softmax(z).unwrap();
        assert!(g.value(p).data().iter().all(|&x| (x - 0.1).abs() < 1e-15));
        let ce = g.cross_entropy(z, 3).unwrap();
        assert!((g.value(ce).item() - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn sum_gives_ones_and_zero_scale_gives_zeros() {
        let (s, ids) = store_with(&[("p", Tensor::vector(vec![1.0, -2.0, 3.0]))]);
        let mut g = Graph::new(&s);
        let p = g.param(ids[0]);
        let loss = g.sum(p);
        assert_eq!(g.backward(loss).unwrap().get(ids[0]).unwrap(), &[1.0, 1.0, 1.0]);

        let mut g = Graph::new(&s);
        let p = g.param(ids[0]);
        let z = g.scale(p, 0.0);
        let loss = g.sum(z);
        assert_eq!(g.backward(loss).unwrap().get(ids[0]).unwrap(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn backward_accumulates_across_calls() {
        let (s, ids) = store_with(&[("p", Tensor::vector(vec![1.0, 2.0]))]);
        let mut g = Graph::new(&s);
        let p = g.param(ids[0]);
        let sq = g.mul(p, p).unwrap();
        let loss = g.sum(sq);
        let mut grads = Gradients::for_store(&s);
        g.backward_into(loss, &mut grads).unwrap();
        g.backward_into(loss, &mut grads).unwrap();
        assert_eq!(grads.get(ids[0]).unwrap(), &[4.0, 8.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let (s, ids) = store_with(&[("p", Tensor::vector(vec![1.0, 2.0]))]);
        let mut g = Graph::new(&s);
        let p = g.param(ids[0]);
        assert_eq!(g.backward(p).unwrap_err(), AutogradError::NonScalarLoss(vec![2]));
    }

    #[test]
    fn shape_errors_name_the_op() {
        let s = ParamStore::new();
        let mut g = Graph::new(&s);
        let a = g.constant(Tensor::zeros(&[3]));
        let b = g.constant(Tensor::zeros(&[4]));
        assert!(matches!(g.add(a, b), Err(AutogradError::ShapeMismatch { op: "add", .. })));
        let w = g.constant(Tensor::zeros(&[2, 5]));
        assert!(matches!(g.matmul(w, a), Err(AutogradError::ShapeMismatch { op: "matmul", .. })));
        assert!(g.slice(a, 2, 2).is_err());
        assert!(g.gather(w, 2).is_err());
    }

    #[test]
    fn gumbel_forward_is_one_hot_and_deterministic_without_noise() {
        let (s, ids) = store_with(&[("l", Tensor::vector(vec![0.1, 2.0, -1.0]))]);
        let mut g = Graph::new(&s);
        let l = g.param(ids[0]);
        let y = g.gumbel_softmax_st(l, 1.0, None).unwrap();
        assert_eq!(g.value(y).data(), &[0.0, 1.0, 0.0]);
        assert!(matches!(g.gumbel_softmax_st(l, 0.0, None), Err(AutogradError::NonPositiveTemperature(_))));

        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let y = g.gumbel_softmax_st(l, 0.5, Some(&mut rng)).unwrap();
            let d = g.value(y).data();
            assert_eq!(d.iter().filter(|&&x| x == 1.0).count(), 1);
            assert_eq!(d.iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn gumbel_single_logit_gradient_is_zero() {
        // soft value is identically 1 for one element
        let (s, ids) = store_with(&[("l", Tensor::vector(vec![0.3]))]);
        let mut g = Graph::new(&s);
        let l = g.param(ids[0]);
        let y = g.gumbel_softmax_st(l, 1.0, None).unwrap();
        assert_eq!(g.value(y).data(), &[1.0]);
        let loss = g.sum(y);
        assert_eq!(g.backward(loss).unwrap().get(ids[0]).unwrap(), &[0.0]);
    }

    #[test]
    fn gumbel_backward_is_softmax_jvp() {
        let logits = vec![0.5, -0.2, 1.1, 0.0];
        let tau = 0.7;
        let (s, ids) = store_with(&[("l", Tensor::vector(logits.clone()))]);
        let mut g = Graph::new(&s);
        let l = g.param(ids[0]);
        let y = g.gumbel_softmax_st(l, tau, None).unwrap();
        let w = g.constant(Tensor::vector(vec![1.0, 2.0, -1.0, 0.5]));
        let prod = g.mul(y, w).unwrap();
        let loss = g.sum(prod);
        let grad = g.backward(loss).unwrap().get(ids[0]).unwrap().to_vec();

        let p = softmax(&logits.iter().map(|x| x / tau).collect::<Vec<_>>());
        let wv = [1.0, 2.0, -1.0, 0.5];
        let inner: f64 = p.iter().zip(&wv).map(|(a, b)| a * b).sum();
        for j in 0..4 {
            let want = p[j] * (wv[j] - inner) / tau;
            assert!((grad[j] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn detach_blocks_gradient() {
        let (s, ids) = store_with(&[("p", Tensor::vector(vec![1.0, 2.0]))]);
        let mut g = Graph::new(&s);
        let p = g.param(ids[0]);
        let d = g.detach(p);
        let prod = g.mul(p, d).unwrap();
        let loss = g.sum(prod);
        assert_eq!(g.backward(loss).unwrap().get(ids[0]).unwrap(), &[1.0, 2.0]);
    }
}
