//! A small reverse-mode autodiff tape over row-major f64 matrices.
//!
//! Every sequence in a batch is laid out as a contiguous block of rows; the
//! attention op is told where each block starts so that tokens only attend
//! within their own sequence. Row-wise ops (linear layers, layer norm, GELU)
//! then run as single large matrix products over the whole batch.

use ndarray::{s, Array2, Axis, Zip};
use rand::Rng;

use crate::error::{Error, Result};

pub type Mat = Array2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Where a gathered row comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSource {
    Table(usize),
    Extra(usize),
}

/// A contiguous run of rows forming one sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub len: usize,
}

struct InfoNceCache {
    a_hat: Mat,
    b_hat: Mat,
    a_norm: Vec<f64>,
    b_norm: Vec<f64>,
    probs: Mat,
}

enum Op {
    Leaf,
    Gather { table: Var, extra: Option<Var>, rows: Vec<RowSource> },
    Add(Var, Var),
    Sub(Var, Var),
    Linear { x: Var, w: Var, b: Var },
    MatMulT { x: Var, w: Var },
    AddRow { x: Var, b: Var },
    Gelu { x: Var, tanh: Mat },
    LayerNorm { x: Var, gain: Var, normed: Mat, inv_std: Vec<f64>, bias: Var },
    Dropout { x: Var, mask: Mat },
    Attention { q: Var, k: Var, v: Var, segments: Vec<Segment>, heads: usize, probs: Vec<Mat> },
    SelectRows { x: Var, rows: Vec<usize> },
    CrossEntropy { logits: Var, targets: Vec<usize>, probs: Mat },
    InfoNce { a: Var, b: Var, tau: f64, cache: Box<InfoNceCache> },
}

struct Node {
    value: Mat,
    op: Op,
    needs_grad: bool,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

pub struct Gradients {
    grads: Vec<Option<Mat>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Mat> {
        self.grads[v.0].as_ref()
    }

    pub fn take(&mut self, v: Var) -> Option<Mat> {
        self.grads[v.0].take()
    }
}

const LN_EPS: f64 = 1e-12;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_K: f64 = 0.044_715;

fn gelu_tanh(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_K * x * x * x);
    // tanh(u) from a single exp
    1.0 - 2.0 / ((2.0 * u).exp() + 1.0)
}

/// Derivative given the cached `t = gelu_tanh(x)`.
fn gelu_grad(x: f64, t: f64) -> f64 {
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_K * x * x)
}

pub(crate) fn softmax_rows_inplace(m: &mut Mat) {
    for mut row in m.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

/// Forward pass of the in-batch contrastive loss, shared with the
/// value-level implementation.
fn info_nce(a: &Mat, b: &Mat, tau: f64) -> Result<(f64, InfoNceCache)> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), found: b.nrows() });
    }
    if !(tau > 0.0) {
        return Err(Error::invalid("temperature must be positive"));
    }
    let n = a.nrows();
    if n == 0 {
        return Err(Error::invalid("empty contrastive batch"));
    }
    let normalize = |m: &Mat| -> Result<(Mat, Vec<f64>)> {
        let norms: Vec<f64> = m.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
        if norms.contains(&0.0) {
            return Err(Error::UndefinedCosine);
        }
        let mut hat = m.clone();
        for (mut row, &l) in hat.rows_mut().into_iter().zip(&norms) {
            row /= l;
        }
        Ok((hat, norms))
    };
    let (a_hat, a_norm) = normalize(a)?;
    let (b_hat, b_norm) = normalize(b)?;
    let mut probs = a_hat.dot(&b_hat.t()) / tau;
    let mut loss = 0.0;
    for (i, mut row) in probs.rows_mut().into_iter().enumerate() {
        let top = (0..n).fold(0, |t, j| if row[j] > row[t] { j } else { t });
        let max = row[top];
        let rest: f64 = (0..n).filter(|&j| j != top).map(|j| (row[j] - max).exp()).sum();
        let log_sum = rest.ln_1p();
        loss += (max - row[i]) + log_sum;
        let lse = max + log_sum;
        row.mapv_inplace(|v| (v - lse).exp());
    }
    Ok((loss / n as f64, InfoNceCache { a_hat, b_hat, a_norm, b_norm, probs }))
}

/// Mean over rows of `-log softmax(cos(a_i, b_j) / tau)_ii`.
pub fn info_nce_loss(a: &Mat, b: &Mat, tau: f64) -> Result<f64> {
    Ok(info_nce(a, b, tau)?.0)
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

    pub fn value(&self, v: Var) -> &Mat {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    fn push(&mut self, value: Mat, op: Op, inputs: &[Var]) -> Var {
        let needs_grad = inputs.iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Mat, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, needs_grad: requires_grad });
        Var(self.nodes.len() - 1)
    }

    pub fn gather(&mut self, table: Var, extra: Option<Var>, rows: Vec<RowSource>) -> Var {
        let t = &self.nodes[table.0].value;
        let mut out = Mat::zeros((rows.len(), t.ncols()));
        for (i, src) in rows.iter().enumerate() {
            let row = match *src {
                RowSource::Table(r) => t.row(r),
                RowSource::Extra(r) => {
                    let e = extra.expect("extra rows requested without an extra table");
                    self.nodes[e.0].value.row(r)
                }
            };
            out.row_mut(i).assign(&row);
        }
        let mut inputs = vec![table];
        inputs.extend(extra);
        self.push(out, Op::Gather { table, extra, rows }, &inputs)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a) + self.value(b);
        self.push(out, Op::Add(a, b), &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a) - self.value(b);
        self.push(out, Op::Sub(a, b), &[a, b])
    }

    /// `x · w + b` with `w` stored input-major (in × out) and `b` a 1×out row.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Var {
        let out = self.value(x).dot(self.value(w)) + self.value(b);
        self.push(out, Op::Linear { x, w, b }, &[x, w, b])
    }

    /// `x · wᵀ`, used for projecting onto an embedding table.
    pub fn matmul_t(&mut self, x: Var, w: Var) -> Var {
        let out = self.value(x).dot(&self.value(w).t());
        self.push(out, Op::MatMulT { x, w }, &[x, w])
    }

    pub fn add_row(&mut self, x: Var, b: Var) -> Var {
        let out = self.value(x) + self.value(b);
        self.push(out, Op::AddRow { x, b }, &[x, b])
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let tanh = self.value(x).mapv(gelu_tanh);
        let mut out = self.value(x).clone();
        Zip::from(&mut out).and(&tanh).for_each(|o, &t| *o = 0.5 * *o * (1.0 + t));
        self.push(out, Op::Gelu { x, tanh }, &[x])
    }

    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var) -> Var {
        let xv = self.value(x);
        let d = xv.ncols() as f64;
        let mut normed = xv.clone();
        let mut inv_std = Vec::with_capacity(xv.nrows());
        for mut row in normed.rows_mut() {
            let mean = row.sum() / d;
            row.mapv_inplace(|v| v - mean);
            let var = row.dot(&row) / d;
            let inv = 1.0 / (var + LN_EPS).sqrt();
            row *= inv;
            inv_std.push(inv);
        }
        let out = &normed * self.value(gain) + self.value(bias);
        self.push(out, Op::LayerNorm { x, gain, normed, inv_std, bias }, &[x, gain, bias])
    }

    /// Inverted dropout; returns `x` untouched when `p` is zero.
    pub fn dropout<R: Rng>(&mut self, x: Var, p: f64, rng: &mut R) -> Var {
        if p <= 0.0 {
            return x;
        }
        let keep = 1.0 - p;
        let shape = self.value(x).dim();
        let mask = Mat::from_shape_simple_fn(shape, || if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 });
        let out = self.value(x) * &mask;
        self.push(out, Op::Dropout { x, mask }, &[x])
    }

    /// Multi-head scaled dot-product attention within each segment.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, segments: Vec<Segment>, heads: usize) -> Var {
        let (qv, kv, vv) = (self.value(q), self.value(k), self.value(v));
        let (n, d) = qv.dim();
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut out = Mat::zeros((n, d));
        let mut probs = Vec::with_capacity(segments.len() * heads);
        for seg in &segments {
            let rows = seg.start..seg.start + seg.len;
            for h in 0..heads {
                let cols = h * dh..(h + 1) * dh;
                let qs = qv.slice(s![rows.clone(), cols.clone()]);
                let ks = kv.slice(s![rows.clone(), cols.clone()]);
                let vs = vv.slice(s![rows.clone(), cols.clone()]);
                let mut p = qs.dot(&ks.t()) * scale;
                softmax_rows_inplace(&mut p);
                out.slice_mut(s![rows.clone(), cols]).assign(&p.dot(&vs));
                probs.push(p);
            }
        }
        self.push(out, Op::Attention { q, k, v, segments, heads, probs }, &[q, k, v])
    }

    /// Attention probabilities of the most recent attention op on `v`'s node.
    pub fn attention_probs(&self, v: Var) -> Option<&[Mat]> {
        match &self.nodes[v.0].op {
            Op::Attention { probs, .. } => Some(probs),
            _ => None,
        }
    }

    pub fn select_rows(&mut self, x: Var, rows: Vec<usize>) -> Var {
        let out = self.value(x).select(Axis(0), &rows);
        self.push(out, Op::SelectRows { x, rows }, &[x])
    }

    /// Mean cross-entropy of `logits` rows against `targets`.
    pub fn cross_entropy(&mut self, logits: Var, targets: Vec<usize>) -> Result<Var> {
        if targets.is_empty() {
            return Err(Error::NothingToPredict);
        }
        let mut probs = self.value(logits).clone();
        softmax_rows_inplace(&mut probs);
        let loss = targets
            .iter()
            .enumerate()
            .map(|(i, &t)| -probs[[i, t]].max(f64::MIN_POSITIVE).ln())
            .sum::<f64>()
            / targets.len() as f64;
        Ok(self.push(Mat::from_elem((1, 1), loss), Op::CrossEntropy { logits, targets, probs }, &[logits]))
    }

    pub fn info_nce(&mut self, a: Var, b: Var, tau: f64) -> Result<Var> {
        let (loss, cache) = info_nce(self.value(a), self.value(b), tau)?;
        Ok(self.push(Mat::from_elem((1, 1), loss), Op::InfoNce { a, b, tau, cache: Box::new(cache) }, &[a, b]))
    }

    /// Back-propagates from a scalar node. Gradients are retained for leaves only.
    pub fn backward(&self, loss: Var) -> Gradients {
        let mut grads: Vec<Option<Mat>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Mat::ones(self.nodes[loss.0].value.dim()));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let mut acc = |v: Var, delta: Mat| {
                if !self.nodes[v.0].needs_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(existing) => *existing += &delta,
                    slot @ None => *slot = Some(delta),
                }
            };
            let wants = |v: Var| self.nodes[v.0].needs_grad;

            match &node.op {
                Op::Leaf => unreachable!(),
                Op::Gather { table, extra, rows } => {
                    if wants(*table) {
                        let mut dt = Mat::zeros(self.value(*table).dim());
                        for (i, src) in rows.iter().enumerate() {
                            if let RowSource::Table(r) = *src {
                                let mut row = dt.row_mut(r);
                                row += &g.row(i);
                            }
                        }
                        acc(*table, dt);
                    }
                    if let Some(e) = extra.filter(|e| wants(*e)) {
                        let mut de = Mat::zeros(self.value(e).dim());
                        for (i, src) in rows.iter().enumerate() {
                            if let RowSource::Extra(r) = *src {
                                let mut row = de.row_mut(r);
                                row += &g.row(i);
                            }
                        }
                        acc(e, de);
                    }
                }
                Op::Add(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, g);
                }
                Op::Sub(a, b) => {
                    acc(*a, g.clone());
                    acc(*b, -g);
                }
                Op::Linear { x, w, b } => {
                    if wants(*x) {
                        acc(*x, g.dot(&self.value(*w).t()));
                    }
                    if wants(*w) {
                        acc(*w, self.value(*x).t().dot(&g));
                    }
                    if wants(*b) {
                        acc(*b, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    }
                }
                Op::MatMulT { x, w } => {
                    if wants(*x) {
                        acc(*x, g.dot(self.value(*w)));
                    }
                    if wants(*w) {
                        acc(*w, g.t().dot(self.value(*x)));
                    }
                }
                Op::AddRow { x, b } => {
                    if wants(*b) {
                        acc(*b, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    }
                    acc(*x, g);
                }
                Op::Gelu { x, tanh } => {
                    let mut dx = g;
                    Zip::from(&mut dx).and(self.value(*x)).and(tanh).for_each(|d, &xv, &t| *d *= gelu_grad(xv, t));
                    acc(*x, dx);
                }
                Op::LayerNorm { x, gain, normed, inv_std, bias } => {
                    if wants(*gain) {
                        acc(*gain, (&g * normed).sum_axis(Axis(0)).insert_axis(Axis(0)));
                    }
                    if wants(*bias) {
                        acc(*bias, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    }
                    if wants(*x) {
                        let d = normed.ncols() as f64;
                        let mut dx = &g * self.value(*gain);
                        for ((mut row, xhat), &inv) in dx.rows_mut().into_iter().zip(normed.rows()).zip(inv_std) {
                            let mean_d = row.sum() / d;
                            let mean_dx = row.dot(&xhat) / d;
                            Zip::from(&mut row).and(&xhat).for_each(|r, &xh| *r = inv * (*r - mean_d - xh * mean_dx));
                        }
                        acc(*x, dx);
                    }
                }
                Op::Dropout { x, mask } => acc(*x, g * mask),
                Op::Attention { q, k, v, segments, heads, probs } => {
                    let (qv, kv, vv) = (self.value(*q), self.value(*k), self.value(*v));
                    let d = qv.ncols();
                    let dh = d / heads;
                    let scale = 1.0 / (dh as f64).sqrt();
                    let mut dq = Mat::zeros(qv.dim());
                    let mut dk = Mat::zeros(kv.dim());
                    let mut dv = Mat::zeros(vv.dim());
                    let mut p_iter = probs.iter();
                    for seg in segments {
                        let rows = seg.start..seg.start + seg.len;
                        for h in 0..*heads {
                            let p = p_iter.next().expect("one probability block per segment and head");
                            let cols = h * dh..(h + 1) * dh;
                            let go = g.slice(s![rows.clone(), cols.clone()]);
                            let qs = qv.slice(s![rows.clone(), cols.clone()]);
                            let ks = kv.slice(s![rows.clone(), cols.clone()]);
                            let vs = vv.slice(s![rows.clone(), cols.clone()]);
                            let dp = go.dot(&vs.t());
                            dv.slice_mut(s![rows.clone(), cols.clone()]).assign(&p.t().dot(&go));
                            let mut ds = &dp * p;
                            for (mut ds_row, p_row) in ds.rows_mut().into_iter().zip(p.rows()) {
                                let total = ds_row.sum();
                                ds_row.scaled_add(-total, &p_row);
                            }
                            ds *= scale;
                            dq.slice_mut(s![rows.clone(), cols.clone()]).assign(&ds.dot(&ks));
                            dk.slice_mut(s![rows.clone(), cols]).assign(&ds.t().dot(&qs));
                        }
                    }
                    acc(*q, dq);
                    acc(*k, dk);
                    acc(*v, dv);
                }
                Op::SelectRows { x, rows } => {
                    let mut dx = Mat::zeros(self.value(*x).dim());
                    for (i, &r) in rows.iter().enumerate() {
                        let mut row = dx.row_mut(r);
                        row += &g.row(i);
                    }
                    acc(*x, dx);
                }
                Op::CrossEntropy { logits, targets, probs } => {
                    let scale = g[[0, 0]] / targets.len() as f64;
                    let mut dl = probs.clone();
                    for (i, &t) in targets.iter().enumerate() {
                        dl[[i, t]] -= 1.0;
                    }
                    dl *= scale;
                    acc(*logits, dl);
                }
                Op::InfoNce { a, b, tau, cache } => {
                    let n = cache.probs.nrows();
                    let mut coeff = cache.probs.clone();
                    for i in 0..n {
                        coeff[[i, i]] -= 1.0;
                    }
                    coeff *= g[[0, 0]] / (n as f64 * tau);
                    let project = |d_hat: Mat, hat: &Mat, norms: &[f64]| {
                        let mut d = d_hat;
                        for ((mut row, h), &l) in d.rows_mut().into_iter().zip(hat.rows()).zip(norms) {
                            let along = row.dot(&h);
                            row.scaled_add(-along, &h);
                            row /= l;
                        }
                        d
                    };
                    if wants(*a) {
                        acc(*a, project(coeff.dot(&cache.b_hat), &cache.a_hat, &cache.a_norm));
                    }
                    if wants(*b) {
                        acc(*b, project(coeff.t().dot(&cache.a_hat), &cache.b_hat, &cache.b_norm));
                    }
                }
            }
        }

        // Leaves keep their accumulated gradients; everything else was taken.
        Gradients { grads }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn randn(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
        Mat::from_shape_simple_fn((r, c), || StandardNormal.sample(rng))
    }

    /// Checks every entry of every leaf against central differences of `build`.
    fn check<F>(leaves: Vec<Mat>, build: F)
    where
        F: Fn(&mut Graph, &[Var]) -> Var,
    {
        let mut g = Graph::new();
        let vars: Vec<Var> = leaves.iter().map(|m| g.leaf(m.clone(), true)).collect();
        let loss = build(&mut g, &vars);
        let grads = g.backward(loss);
        let eval = |ls: &[Mat]| {
            let mut g = Graph::new();
            let vars: Vec<Var> = ls.iter().map(|m| g.leaf(m.clone(), true)).collect();
            let out = build(&mut g, &vars);
            g.scalar(out)
        };
        let h = 1e-5;
        for (li, leaf) in leaves.iter().enumerate() {
            let analytic = grads.get(vars[li]).cloned().unwrap_or_else(|| Mat::zeros(leaf.dim()));
            for idx in 0..leaf.len() {
                let (r, c) = (idx / leaf.ncols(), idx % leaf.ncols());
                let mut plus = leaves.clone();
                plus[li][[r, c]] += h;
                let mut minus = leaves.clone();
                minus[li][[r, c]] -= h;
                let numeric = (eval(&plus) - eval(&minus)) / (2.0 * h);
                let a = analytic[[r, c]];
                let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                assert!(err < 1e-5, "leaf {li} [{r},{c}]: analytic {a} numeric {numeric}");
            }
        }
    }

    /// Reduces a matrix to a scalar with fixed random weights.
    fn probe(g: &mut Graph, x: Var, seed: u64) -> Var {
        let (r, c) = g.value(x).dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = randn(&mut rng, r, c);
        let targets: Vec<usize> = (0..r).map(|i| i % c).collect();
        let wv = g.leaf(w, false);
        let mixed = g.add(x, wv);
        g.cross_entropy(mixed, targets).unwrap()
    }

    #[test]
    fn linear_gelu_layernorm_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let leaves = vec![randn(&mut rng, 4, 5), randn(&mut rng, 5, 3), randn(&mut rng, 1, 3), randn(&mut rng, 1, 3), randn(&mut rng, 1, 3)];
        check(leaves, |g, v| {
            let y = g.linear(v[0], v[1], v[2]);
            let y = g.gelu(y);
            let y = g.layer_norm(y, v[3], v[4]);
            probe(g, y, 9)
        });
    }

    #[test]
    fn attention_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let leaves = vec![randn(&mut rng, 7, 4), randn(&mut rng, 7, 4), randn(&mut rng, 7, 4)];
        let segments = vec![Segment { start: 0, len: 3 }, Segment { start: 3, len: 4 }];
        check(leaves, move |g, v| {
            let y = g.attention(v[0], v[1], v[2], segments.clone(), 2);
            probe(g, y, 4)
        });
    }

    #[test]
    fn gather_select_matmul_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let leaves = vec![randn(&mut rng, 6, 3), randn(&mut rng, 2, 3), randn(&mut rng, 1, 6)];
        check(leaves, |g, v| {
            let rows = vec![RowSource::Table(1), RowSource::Extra(0), RowSource::Table(1), RowSource::Extra(1)];
            let x = g.gather(v[0], Some(v[1]), rows);
            let x = g.select_rows(x, vec![0, 1, 3]);
            let logits = g.matmul_t(x, v[0]);
            let logits = g.add_row(logits, v[2]);
            g.cross_entropy(logits, vec![0, 5, 2]).unwrap()
        });
    }

    #[test]
    fn info_nce_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let leaves = vec![randn(&mut rng, 4, 5), randn(&mut rng, 4, 5), randn(&mut rng, 4, 5)];
        check(leaves, |g, v| {
            let a = g.sub(v[0], v[2]);
            g.info_nce(a, v[1], 0.5).unwrap()
        });
    }

    #[test]
    fn dropout_gradient_uses_mask() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = randn(&mut rng, 3, 4);
        let mut g = Graph::new();
        let xv = g.leaf(x, true);
        let mut drop_rng = ChaCha8Rng::seed_from_u64(6);
        let y = g.dropout(xv, 0.5, &mut drop_rng);
        let loss = probe(&mut g, y, 3);
        let grads = g.backward(loss);
        let gx = grads.get(xv).unwrap();
        let y_val = g.value(y);
        for (gv, yv) in gx.iter().zip(y_val.iter()) {
            if *yv == 0.0 {
                assert_eq!(*gv, 0.0);
            }
        }
    }

    #[test]
    fn attention_rows_are_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut g = Graph::new();
        let q = g.leaf(randn(&mut rng, 5, 4) * 3.0, false);
        let k = g.leaf(randn(&mut rng, 5, 4), false);
        let v = g.leaf(randn(&mut rng, 5, 4), false);
        let out = g.attention(q, k, v, vec![Segment { start: 0, len: 2 }, Segment { start: 2, len: 3 }], 2);
        for p in g.attention_probs(out).unwrap() {
            for row in p.rows() {
                assert!((row.sum() - 1.0).abs() < 1e-12);
                assert!(row.iter().all(|&x| x >= 0.0));
            }
        }
    }

    #[test]
    fn frozen_leaves_receive_no_gradient() {
        let mut g = Graph::new();
        let a = g.leaf(Mat::ones((2, 2)), false);
        let b = g.leaf(Mat::ones((2, 2)), true);
        let c = g.add(a, b);
        let loss = g.cross_entropy(c, vec![0, 1]).unwrap();
        let grads = g.backward(loss);
        assert!(grads.get(a).is_none());
        assert!(grads.get(b).is_some());
    }
}
