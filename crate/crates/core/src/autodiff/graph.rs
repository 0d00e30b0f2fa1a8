//! Tape-based reverse-mode differentiation.
//!
//! Nodes are appended in evaluation order, so the tape is topologically
//! sorted by construction and `backward` is a single reverse sweep.

use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sum(Vec<Var>),
    Dot(Var, Var),
    Dense { x: Var, w: Var, b: Option<Var> },
    Conv1d { input: Var, filters: Var, bias: Var },
    MaxPoolTime { input: Var, argmax: Vec<usize> },
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Concat(Vec<Var>),
    Slice { src: Var, start: usize },
    Embed { table: Var, ids: Vec<usize> },
    SoftmaxCe { logits: Var, label: usize, probs: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

fn mismatch(op: &'static str, detail: String) -> Error {
    Error::ShapeMismatch { op, detail }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
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

    /// Trainable leaf.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    /// Leaf that receives no gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Gradient of the last `backward` loss with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    fn vec_len(&self, v: Var, op: &'static str) -> Result<usize> {
        let shape = self.value(v).shape();
        match shape {
            [n] => Ok(*n),
            _ => Err(mismatch(op, format!("expected a vector, got shape {shape:?}"))),
        }
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(mismatch(
                "add",
                format!("{:?} vs {:?}", va.shape(), vb.shape()),
            ));
        }
        let values = va.values().iter().zip(vb.values()).map(|(x, y)| x + y).collect();
        let t = Tensor::new(va.shape().to_vec(), values)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(t, Op::Add(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(mismatch(
                "mul",
                format!("{:?} vs {:?}", va.shape(), vb.shape()),
            ));
        }
        let values = va.values().iter().zip(vb.values()).map(|(x, y)| x * y).collect();
        let t = Tensor::new(va.shape().to_vec(), values)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(t, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let va = self.value(a);
        let t = Tensor::new(
            va.shape().to_vec(),
            va.values().iter().map(|x| x * k).collect(),
        )
        .expect("same shape");
        let rg = self.rg(&[a]);
        self.push(t, Op::Scale(a, k), rg)
    }

    /// Elementwise sum of same-shaped nodes, accumulated left to right.
    pub fn sum(&mut self, terms: &[Var]) -> Result<Var> {
        let first = *terms.first().ok_or(Error::EmptyInput("sum"))?;
        let shape = self.value(first).shape().to_vec();
        let mut acc = vec![0.0; self.value(first).len()];
        for &t in terms {
            let v = self.value(t);
            if v.shape() != shape.as_slice() {
                return Err(mismatch("sum", format!("{shape:?} vs {:?}", v.shape())));
            }
            for (a, x) in acc.iter_mut().zip(v.values()) {
                *a += x;
            }
        }
        let t = Tensor::new(shape, acc)?;
        let rg = self.rg(terms);
        Ok(self.push(t, Op::Sum(terms.to_vec()), rg))
    }

    pub fn mean(&mut self, terms: &[Var]) -> Result<Var> {
        let s = self.sum(terms)?;
        Ok(self.scale(s, 1.0 / terms.len() as f64))
    }

    /// Inner product of two equal-shaped nodes; scalar result.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(mismatch(
                "dot",
                format!("{:?} vs {:?}", va.shape(), vb.shape()),
            ));
        }
        let s = va.values().iter().zip(vb.values()).map(|(x, y)| x * y).sum();
        let rg = self.rg(&[a, b]);
        Ok(self.push(Tensor::scalar(s), Op::Dot(a, b), rg))
    }

    /// `x[n] · w[n, m] + b[m]`.
    pub fn dense(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let n = self.vec_len(x, "dense")?;
        let (rows, m) = match self.value(w).shape() {
            [r, c] => (*r, *c),
            s => return Err(mismatch("dense", format!("weight shape {s:?} is not 2-D"))),
        };
        if rows != n {
            return Err(mismatch("dense", format!("input {n} vs weight rows {rows}")));
        }
        let mut out = match b {
            Some(b) => {
                let bv = self.value(b);
                if bv.shape() != [m] {
                    return Err(mismatch(
                        "dense",
                        format!("bias shape {:?} vs output {m}", bv.shape()),
                    ));
                }
                bv.values().to_vec()
            }
            None => vec![0.0; m],
        };
        let xv = self.value(x).values();
        let wv = self.value(w).values();
        for (i, &xi) in xv.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &wv[i * m..(i + 1) * m];
            for (o, wij) in out.iter_mut().zip(row) {
                *o += xi * wij;
            }
        }
        let mut deps = vec![x, w];
        deps.extend(b);
        let rg = self.rg(&deps);
        Ok(self.push(Tensor::vector(out), Op::Dense { x, w, b }, rg))
    }

    /// Valid 1-D convolution: `input[L, d]`, `filters[k, d, F]`, `bias[F]`
    /// gives `[L - k + 1, F]`.
    pub fn conv1d(&mut self, input: Var, filters: Var, bias: Var) -> Result<Var> {
        let (len, d) = match self.value(input).shape() {
            [l, d] => (*l, *d),
            s => return Err(mismatch("conv1d", format!("input shape {s:?} is not 2-D"))),
        };
        let (k, fd, nf) = match self.value(filters).shape() {
            [k, d, f] => (*k, *d, *f),
            s => return Err(mismatch("conv1d", format!("filter shape {s:?} is not 3-D"))),
        };
        if fd != d {
            return Err(mismatch("conv1d", format!("input width {d} vs filter width {fd}")));
        }
        if self.value(bias).shape() != [nf] {
            return Err(mismatch(
                "conv1d",
                format!("bias shape {:?} vs {nf} filters", self.value(bias).shape()),
            ));
        }
        if len < k {
            return Err(Error::SequenceTooShort { len, width: k });
        }
        let steps = len - k + 1;
        let xv = self.value(input).values();
        let wv = self.value(filters).values();
        let bv = self.value(bias).values();
        let mut out = Vec::with_capacity(steps * nf);
        for _ in 0..steps {
            out.extend_from_slice(bv);
        }
        // filters are laid out [i][j][f]; the inner loop runs over f
        for t in 0..steps {
            let row = &mut out[t * nf..(t + 1) * nf];
            for i in 0..k {
                let xrow = &xv[(t + i) * d..(t + i + 1) * d];
                for (j, &xj) in xrow.iter().enumerate() {
                    if xj == 0.0 {
                        continue;
                    }
                    let w = &wv[(i * d + j) * nf..(i * d + j + 1) * nf];
                    for (o, wf) in row.iter_mut().zip(w) {
                        *o += xj * wf;
                    }
                }
            }
        }
        let t = Tensor::new(vec![steps, nf], out)?;
        let rg = self.rg(&[input, filters, bias]);
        Ok(self.push(
            t,
            Op::Conv1d {
                input,
                filters,
                bias,
            },
            rg,
        ))
    }

    /// Column-wise maximum over the time axis of `[T, F]`. Ties resolve to
    /// the earliest time step.
    pub fn max_pool_time(&mut self, input: Var) -> Result<Var> {
        let (steps, nf) = match self.value(input).shape() {
            [t, f] => (*t, *f),
            s => {
                return Err(mismatch(
                    "max_pool_time",
                    format!("input shape {s:?} is not 2-D"),
                ))
            }
        };
        if steps == 0 {
            return Err(Error::EmptyInput("max_pool_time"));
        }
        let xv = self.value(input).values();
        let mut best = xv[..nf].to_vec();
        let mut argmax = vec![0usize; nf];
        for t in 1..steps {
            for f in 0..nf {
                let x = xv[t * nf + f];
                if x > best[f] {
                    best[f] = x;
                    argmax[f] = t;
                }
            }
        }
        let rg = self.rg(&[input]);
        Ok(self.push(Tensor::vector(best), Op::MaxPoolTime { input, argmax }, rg))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let va = self.value(a);
        let t = Tensor::new(va.shape().to_vec(), va.values().iter().map(|&x| f(x)).collect())
            .expect("same shape");
        let rg = self.rg(&[a]);
        self.push(t, op, rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    /// Concatenation of vectors.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::EmptyInput("concat"));
        }
        let mut out = Vec::new();
        for &p in parts {
            self.vec_len(p, "concat")?;
            out.extend_from_slice(self.value(p).values());
        }
        let rg = self.rg(parts);
        Ok(self.push(Tensor::vector(out), Op::Concat(parts.to_vec()), rg))
    }

    /// `src[start..start + len]` of a vector.
    pub fn slice(&mut self, src: Var, start: usize, len: usize) -> Result<Var> {
        let n = self.vec_len(src, "slice")?;
        if len == 0 || start + len > n {
            return Err(mismatch(
                "slice",
                format!("range {start}..{} of length {n}", start + len),
            ));
        }
        let t = Tensor::vector(self.value(src).values()[start..start + len].to_vec());
        let rg = self.rg(&[src]);
        Ok(self.push(t, Op::Slice { src, start }, rg))
    }

    /// Rows of `table[V, d]` selected by `ids`, giving `[ids.len(), d]`.
    pub fn embed(&mut self, table: Var, ids: &[u32]) -> Result<Var> {
        let (rows, d) = match self.value(table).shape() {
            [v, d] => (*v, *d),
            s => return Err(mismatch("embed", format!("table shape {s:?} is not 2-D"))),
        };
        if ids.is_empty() {
            return Err(Error::EmptyInput("embed"));
        }
        let tv = self.value(table).values();
        let mut out = Vec::with_capacity(ids.len() * d);
        let mut idx = Vec::with_capacity(ids.len());
        for &id in ids {
            let id = id as usize;
            if id >= rows {
                return Err(mismatch("embed", format!("token id {id} >= {rows} rows")));
            }
            out.extend_from_slice(&tv[id * d..(id + 1) * d]);
            idx.push(id);
        }
        let t = Tensor::new(vec![ids.len(), d], out)?;
        let rg = self.rg(&[table]);
        Ok(self.push(t, Op::Embed { table, ids: idx }, rg))
    }

    /// `-log softmax(logits)[label]`, computed with max subtraction.
    pub fn softmax_cross_entropy(&mut self, logits: Var, label: usize) -> Result<Var> {
        let c = self.vec_len(logits, "softmax_cross_entropy")?;
        if c < 2 || label >= c {
            return Err(Error::LabelOutOfRange { label, classes: c });
        }
        let probs = softmax(self.value(logits).values());
        let lv = self.value(logits).values();
        let max = lv.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + lv.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
        let loss = lse - lv[label];
        let rg = self.rg(&[logits]);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::SoftmaxCe {
                logits,
                label,
                probs,
            },
            rg,
        ))
    }

    /// Reverse sweep from a scalar `loss`. Gradients from earlier calls
    /// are discarded.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::NonScalarLoss(lv.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            if self.nodes[i].requires_grad {
                self.propagate(i, &g, &mut grads);
            }
            grads[i] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let nodes = &self.nodes;
        let mut acc = |v: Var, f: &mut dyn FnMut(&mut [f64])| {
            if !nodes[v.0].requires_grad {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; nodes[v.0].value.len()]);
            f(slot);
        };
        let val = |v: Var| nodes[v.0].value.values();
        match &nodes[i].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    acc(v, &mut |s| s.iter_mut().zip(g).for_each(|(s, g)| *s += g));
                }
            }
            Op::Mul(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                acc(*a, &mut |s| {
                    for k in 0..s.len() {
                        s[k] += g[k] * vb[k];
                    }
                });
                acc(*b, &mut |s| {
                    for k in 0..s.len() {
                        s[k] += g[k] * va[k];
                    }
                });
            }
            Op::Scale(a, k) => {
                acc(*a, &mut |s| s.iter_mut().zip(g).for_each(|(s, g)| *s += k * g));
            }
            Op::Sum(terms) => {
                for &t in terms {
                    acc(t, &mut |s| s.iter_mut().zip(g).for_each(|(s, g)| *s += g));
                }
            }
            Op::Dot(a, b) => {
                let (va, vb) = (val(*a), val(*b));
                acc(*a, &mut |s| s.iter_mut().zip(vb).for_each(|(s, y)| *s += g[0] * y));
                acc(*b, &mut |s| s.iter_mut().zip(va).for_each(|(s, x)| *s += g[0] * x));
            }
            Op::Dense { x, w, b } => {
                let (xv, wv) = (val(*x), val(*w));
                let m = g.len();
                acc(*x, &mut |s| {
                    for (i, si) in s.iter_mut().enumerate() {
                        let row = &wv[i * m..(i + 1) * m];
                        *si += row.iter().zip(g).map(|(w, g)| w * g).sum::<f64>();
                    }
                });
                acc(*w, &mut |s| {
                    for (i, &xi) in xv.iter().enumerate() {
                        if xi == 0.0 {
                            continue;
                        }
                        let row = &mut s[i * m..(i + 1) * m];
                        row.iter_mut().zip(g).for_each(|(s, g)| *s += xi * g);
                    }
                });
                if let Some(b) = b {
                    acc(*b, &mut |s| s.iter_mut().zip(g).for_each(|(s, g)| *s += g));
                }
            }
            Op::Conv1d {
                input,
                filters,
                bias,
            } => {
                let xv = val(*input);
                let wv = val(*filters);
                let (k, d, nf) = match nodes[filters.0].value.shape() {
                    [k, d, f] => (*k, *d, *f),
                    _ => unreachable!("checked in forward"),
                };
                let steps = g.len() / nf;
                acc(*input, &mut |s| {
                    for t in 0..steps {
                        let gt = &g[t * nf..(t + 1) * nf];
                        for i in 0..k {
                            for j in 0..d {
                                let w = &wv[(i * d + j) * nf..(i * d + j + 1) * nf];
                                s[(t + i) * d + j] +=
                                    w.iter().zip(gt).map(|(w, g)| w * g).sum::<f64>();
                            }
                        }
                    }
                });
                acc(*filters, &mut |s| {
                    for t in 0..steps {
                        let gt = &g[t * nf..(t + 1) * nf];
                        for i in 0..k {
                            for j in 0..d {
                                let xj = xv[(t + i) * d + j];
                                if xj == 0.0 {
                                    continue;
                                }
                                let sw = &mut s[(i * d + j) * nf..(i * d + j + 1) * nf];
                                sw.iter_mut().zip(gt).for_each(|(s, g)| *s += xj * g);
                            }
                        }
                    }
                });
                acc(*bias, &mut |s| {
                    for t in 0..steps {
                        for f in 0..nf {
                            s[f] += g[t * nf + f];
                        }
                    }
                });
            }
            Op::MaxPoolTime { input, argmax } => {
                let nf = argmax.len();
                acc(*input, &mut |s| {
                    for (f, &t) in argmax.iter().enumerate() {
                        s[t * nf + f] += g[f];
                    }
                });
            }
            Op::Relu(a) => {
                let va = val(*a);
                acc(*a, &mut |s| {
                    for k in 0..s.len() {
                        if va[k] > 0.0 {
                            s[k] += g[k];
                        }
                    }
                });
            }
            Op::Sigmoid(a) => {
                let y = nodes[i].value.values();
                acc(*a, &mut |s| {
                    for k in 0..s.len() {
                        s[k] += g[k] * y[k] * (1.0 - y[k]);
                    }
                });
            }
            Op::Tanh(a) => {
                let y = nodes[i].value.values();
                acc(*a, &mut |s| {
                    for k in 0..s.len() {
                        s[k] += g[k] * (1.0 - y[k] * y[k]);
                    }
                });
            }
            Op::Concat(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let n = nodes[p.0].value.len();
                    let gp = &g[offset..offset + n];
                    acc(p, &mut |s| s.iter_mut().zip(gp).for_each(|(s, g)| *s += g));
                    offset += n;
                }
            }
            Op::Slice { src, start } => {
                let start = *start;
                acc(*src, &mut |s| {
                    s[start..start + g.len()]
                        .iter_mut()
                        .zip(g)
                        .for_each(|(s, g)| *s += g)
                });
            }
            Op::Embed { table, ids } => {
                let d = g.len() / ids.len();
                acc(*table, &mut |s| {
                    for (r, &id) in ids.iter().enumerate() {
                        let row = &mut s[id * d..(id + 1) * d];
                        row.iter_mut()
                            .zip(&g[r * d..(r + 1) * d])
                            .for_each(|(s, g)| *s += g);
                    }
                });
            }
            Op::SoftmaxCe {
                logits,
                label,
                probs,
            } => {
                acc(*logits, &mut |s| {
                    for (k, sk) in s.iter_mut().enumerate() {
                        let onehot = if k == *label { 1.0 } else { 0.0 };
                        *sk += g[0] * (probs[k] - onehot);
                    }
                });
            }
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
