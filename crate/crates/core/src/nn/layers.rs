//! Model building blocks with hand-derived backward passes.
//!
//! Every layer is immutable during forward/backward; gradients accumulate
//! into a structurally identical gradient buffer (see [`ParamVisit`]), so
//! batch items can run in parallel and their gradients sum in a fixed
//! order.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tensor::Mat;

/// Fixed-order traversal of every parameter matrix. The order defines the
/// optimizer-state and checkpoint layouts.
pub trait ParamVisit {
    fn collect<'a>(&'a self, out: &mut Vec<&'a Mat>);
    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Mat>);

    fn params(&self) -> Vec<&Mat> {
        let mut v = Vec::new();
        self.collect(&mut v);
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Mat> {
        let mut v = Vec::new();
        self.collect_mut(&mut v);
        v
    }
}

pub fn zeros_like<T: ParamVisit + Clone>(model: &T) -> T {
    let mut g = model.clone();
    for m in g.params_mut() {
        m.data.fill(0.0);
    }
    g
}

pub fn add_grads<T: ParamVisit>(acc: &mut T, item: &T) {
    let mut dst = Vec::new();
    acc.collect_mut(&mut dst);
    let mut src = Vec::new();
    item.collect(&mut src);
    for (d, s) in dst.into_iter().zip(src) {
        d.add_assign(s);
    }
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break u;
        }
    };
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn randn_mat(rows: usize, cols: usize, std: f64, rng: &mut ChaCha8Rng) -> Mat {
    let data = (0..rows * cols).map(|_| gaussian(rng) * std).collect();
    Mat::from_vec(rows, cols, data)
}

const INIT_STD: f64 = 0.02;

// ---------------------------------------------------------------------------
// Linear

#[derive(Debug, Clone)]
pub struct Linear {
    /// (in, out)
    pub w: Mat,
    /// (1, out)
    pub b: Mat,
}

impl Linear {
    pub fn new(input: usize, output: usize, rng: &mut ChaCha8Rng) -> Self {
        Self { w: randn_mat(input, output, INIT_STD, rng), b: Mat::zeros(1, output) }
    }

    pub fn forward(&self, x: &Mat) -> Mat {
        let mut y = x.matmul(&self.w);
        for r in 0..y.rows {
            let row = y.row_mut(r);
            for (v, b) in row.iter_mut().zip(self.b.row(0)) {
                *v += b;
            }
        }
        y
    }

    /// Returns grad wrt input; accumulates parameter grads.
    pub fn backward(&self, x: &Mat, gy: &Mat, grads: &mut Linear) -> Mat {
        grads.w.add_assign(&x.matmul_at(gy));
        for r in 0..gy.rows {
            for (gb, g) in grads.b.row_mut(0).iter_mut().zip(gy.row(r)) {
                *gb += g;
            }
        }
        gy.matmul_bt(&self.w)
    }
}

impl ParamVisit for Linear {
    fn collect<'a>(&'a self, out: &mut Vec<&'a Mat>) {
        out.push(&self.w);
        out.push(&self.b);
    }
    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Mat>) {
        out.push(&mut self.w);
        out.push(&mut self.b);
    }
}

// ---------------------------------------------------------------------------
// LayerNorm

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: Mat,
    pub beta: Mat,
}

pub struct LayerNormCache {
    /// Normalized rows (before gamma/beta).
    x_hat: Mat,
    inv_std: Vec<f64>,
}

impl LayerNorm {
    pub fn new(dim: usize) -> Self {
        Self { gamma: Mat::from_vec(1, dim, vec![1.0; dim]), beta: Mat::zeros(1, dim) }
    }

    pub fn forward(&self, x: &Mat) -> (Mat, LayerNormCache) {
        let d = x.cols as f64;
        let mut x_hat = x.clone();
        let mut inv_std = Vec::with_capacity(x.rows);
        for r in 0..x.rows {
            let row = x_hat.row_mut(r);
            let mean = row.iter().sum::<f64>() / d;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
            let inv = 1.0 / (var + LN_EPS).sqrt();
            for v in row.iter_mut() {
                *v = (*v - mean) * inv;
            }
            inv_std.push(inv);
        }
        let mut y = x_hat.clone();
        for r in 0..y.rows {
            let row = y.row_mut(r);
            for ((v, g), b) in row.iter_mut().zip(self.gamma.row(0)).zip(self.beta.row(0)) {
                *v = *v * g + b;
            }
        }
        (y, LayerNormCache { x_hat, inv_std })
    }

    pub fn backward(&self, cache: &LayerNormCache, gy: &Mat, grads: &mut LayerNorm) -> Mat {
        let d = gy.cols as f64;
        let mut gx = gy.clone();
        for r in 0..gy.rows {
            let gy_row = gy.row(r);
            let xh_row = cache.x_hat.row(r);
            for ((gg, g), xh) in
                grads.gamma.row_mut(0).iter_mut().zip(gy_row).zip(xh_row)
            {
                *gg += g * xh;
            }
            for (gb, g) in grads.beta.row_mut(0).iter_mut().zip(gy_row) {
                *gb += g;
            }
            // gx = inv_std * (h - mean(h) - x_hat * mean(h * x_hat)),
            // where h = gy * gamma.
            let gamma = self.gamma.row(0);
            let mut mean_h = 0.0;
            let mut mean_hx = 0.0;
            for ((g, ga), xh) in gy_row.iter().zip(gamma).zip(xh_row) {
                let h = g * ga;
                mean_h += h;
                mean_hx += h * xh;
            }
            mean_h /= d;
            mean_hx /= d;
            let inv = cache.inv_std[r];
            let gx_row = gx.row_mut(r);
            for ((slot, (g, ga)), xh) in
                gx_row.iter_mut().zip(gy_row.iter().zip(gamma)).zip(xh_row)
            {
                *slot = inv * (g * ga - mean_h - xh * mean_hx);
            }
        }
        gx
    }
}

impl ParamVisit for LayerNorm {
    fn collect<'a>(&'a self, out: &mut Vec<&'a Mat>) {
        out.push(&self.gamma);
        out.push(&self.beta);
    }
    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Mat>) {
        out.push(&mut self.gamma);
        out.push(&mut self.beta);
    }
}

// ---------------------------------------------------------------------------
// GELU (tanh approximation; smooth, so finite-difference checks stay tight)

const GELU_C: f64 = 0.7978845608028654; // sqrt(2/pi)
const GELU_A: f64 = 0.044715;

pub fn gelu(x: &Mat) -> Mat {
    let mut y = x.clone();
    for v in &mut y.data {
        let u = GELU_C * (*v + GELU_A * *v * *v * *v);
        *v = 0.5 * *v * (1.0 + u.tanh());
    }
    y
}

pub fn gelu_backward(x: &Mat, gy: &Mat) -> Mat {
    let mut gx = gy.clone();
    for (g, &v) in gx.data.iter_mut().zip(&x.data) {
        let u = GELU_C * (v + GELU_A * v * v * v);
        let t = u.tanh();
        let sech2 = 1.0 - t * t;
        let du = GELU_C * (1.0 + 3.0 * GELU_A * v * v);
        *g *= 0.5 * (1.0 + t) + 0.5 * v * sech2 * du;
    }
    gx
}

// ---------------------------------------------------------------------------
// Softmax over rows

pub fn softmax_rows(x: &Mat) -> Mat {
    let mut y = x.clone();
    for r in 0..y.rows {
        let row = y.row_mut(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    y
}

/// Backward through row softmax given the forward probabilities.
pub fn softmax_rows_backward(probs: &Mat, gy: &Mat) -> Mat {
    let mut gx = gy.clone();
    for r in 0..gx.rows {
        let p = probs.row(r);
        let g = gy.row(r);
        let dot: f64 = p.iter().zip(g).map(|(a, b)| a * b).sum();
        for (slot, (pi, gi)) in gx.row_mut(r).iter_mut().zip(p.iter().zip(g)) {
            *slot = pi * (gi - dot);
        }
    }
    gx
}

// ---------------------------------------------------------------------------
// Multi-head attention

/// Large negative logit standing in for -inf; keeps masked probabilities at
/// exactly zero after the max-shifted softmax without creating NaNs.
pub const MASK_NEG: f64 = -1e30;

#[derive(Debug, Clone)]
pub struct MultiHeadAttention {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub heads: usize,
}

pub struct AttentionCache {
    q_in: Mat,
    kv_in: Mat,
    q: Mat,
    k: Mat,
    v: Mat,
    /// Per-head softmax probabilities.
    probs: Vec<Mat>,
    concat: Mat,
}

#[derive(Clone, Copy)]
pub struct AttnMask<'a> {
    pub causal: bool,
    /// Key positions to hide (true = masked out).
    pub key_pad: Option<&'a [bool]>,
}

impl<'a> AttnMask<'a> {
    pub fn none() -> Self {
        Self { causal: false, key_pad: None }
    }
    pub fn causal() -> Self {
        Self { causal: true, key_pad: None }
    }
    pub fn padding(mask: &'a [bool]) -> Self {
        Self { causal: false, key_pad: Some(mask) }
    }
}

impl MultiHeadAttention {
    pub fn new(dim: usize, heads: usize, rng: &mut ChaCha8Rng) -> Self {
        assert!(dim % heads == 0, "dim {dim} not divisible by heads {heads}");
        Self {
            wq: Linear::new(dim, dim, rng),
            wk: Linear::new(dim, dim, rng),
            wv: Linear::new(dim, dim, rng),
            wo: Linear::new(dim, dim, rng),
            heads,
        }
    }

    pub fn forward(&self, q_in: &Mat, kv_in: &Mat, mask: AttnMask) -> (Mat, AttentionCache) {
        let dim = self.wq.w.cols;
        let dh = dim / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let q = self.wq.forward(q_in);
        let k = self.wk.forward(kv_in);
        let v = self.wv.forward(kv_in);
        let mut concat = Mat::zeros(q_in.rows, dim);
        let mut probs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let qh = q.col_slice(h * dh, (h + 1) * dh);
            let kh = k.col_slice(h * dh, (h + 1) * dh);
            let vh = v.col_slice(h * dh, (h + 1) * dh);
            let mut scores = qh.matmul_bt(&kh);
            scores.scale(scale);
            apply_mask(&mut scores, mask);
            let p = softmax_rows(&scores);
            let ctx = p.matmul(&vh);
            concat.col_add_assign(h * dh, &ctx);
            probs.push(p);
        }
        let out = self.wo.forward(&concat);
        (
            out,
            AttentionCache { q_in: q_in.clone(), kv_in: kv_in.clone(), q, k, v, probs, concat },
        )
    }

    /// Returns (grad wrt q_in, grad wrt kv_in).
    pub fn backward(
        &self,
        cache: &AttentionCache,
        gy: &Mat,
        grads: &mut MultiHeadAttention,
    ) -> (Mat, Mat) {
        let dim = self.wq.w.cols;
        let dh = dim / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let g_concat = self.wo.backward(&cache.concat, gy, &mut grads.wo);

        let mut gq = Mat::zeros(cache.q.rows, dim);
        let mut gk = Mat::zeros(cache.k.rows, dim);
        let mut gv = Mat::zeros(cache.v.rows, dim);
        for h in 0..self.heads {
            let qh = cache.q.col_slice(h * dh, (h + 1) * dh);
            let kh = cache.k.col_slice(h * dh, (h + 1) * dh);
            let vh = cache.v.col_slice(h * dh, (h + 1) * dh);
            let p = &cache.probs[h];
            let g_ctx = g_concat.col_slice(h * dh, (h + 1) * dh);
            let gp = g_ctx.matmul_bt(&vh);
            let gvh = p.matmul_at(&g_ctx);
            let mut gs = softmax_rows_backward(p, &gp);
            gs.scale(scale);
            let gqh = gs.matmul(&kh);
            let gkh = gs.matmul_at(&qh);
            gq.col_add_assign(h * dh, &gqh);
            gk.col_add_assign(h * dh, &gkh);
            gv.col_add_assign(h * dh, &gvh);
        }
        let g_qin = self.wq.backward(&cache.q_in, &gq, &mut grads.wq);
        let mut g_kvin = self.wk.backward(&cache.kv_in, &gk, &mut grads.wk);
        g_kvin.add_assign(&self.wv.backward(&cache.kv_in, &gv, &mut grads.wv));
        (g_qin, g_kvin)
    }
}

fn apply_mask(scores: &mut Mat, mask: AttnMask) {
    if mask.causal {
        for r in 0..scores.rows {
            for c in (r + 1)..scores.cols {
                *scores.at_mut(r, c) = MASK_NEG;
            }
        }
    }
    if let Some(pad) = mask.key_pad {
        debug_assert_eq!(pad.len(), scores.cols);
        for r in 0..scores.rows {
            let row = scores.row_mut(r);
            for (slot, &m) in row.iter_mut().zip(pad) {
                if m {
                    *slot = MASK_NEG;
                }
            }
        }
    }
}

impl ParamVisit for MultiHeadAttention {
    fn collect<'a>(&'a self, out: &mut Vec<&'a Mat>) {
        self.wq.collect(out);
        self.wk.collect(out);
        self.wv.collect(out);
        self.wo.collect(out);
    }
    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Mat>) {
        self.wq.collect_mut(out);
        self.wk.collect_mut(out);
        self.wv.collect_mut(out);
        self.wo.collect_mut(out);
    }
}

// ---------------------------------------------------------------------------
// Feed-forward block

#[derive(Debug, Clone)]
pub struct FeedForward {
    pub lin1: Linear,
    pub lin2: Linear,
}

pub struct FeedForwardCache {
    x: Mat,
    pre_act: Mat,
    act: Mat,
}

impl FeedForward {
    pub fn new(dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        Self { lin1: Linear::new(dim, hidden, rng), lin2: Linear::new(hidden, dim, rng) }
    }

    pub fn forward(&self, x: &Mat) -> (Mat, FeedForwardCache) {
        let pre_act = self.lin1.forward(x);
        let act = gelu(&pre_act);
        let y = self.lin2.forward(&act);
        (y, FeedForwardCache { x: x.clone(), pre_act, act })
    }

    pub fn backward(&self, cache: &FeedForwardCache, gy: &Mat, grads: &mut FeedForward) -> Mat {
        let g_act = self.lin2.backward(&cache.act, gy, &mut grads.lin2);
        let g_pre = gelu_backward(&cache.pre_act, &g_act);
        self.lin1.backward(&cache.x, &g_pre, &mut grads.lin1)
    }
}

impl ParamVisit for FeedForward {
    fn collect<'a>(&'a self, out: &mut Vec<&'a Mat>) {
        self.lin1.collect(out);
        self.lin2.collect(out);
    }
    fn collect_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Mat>) {
        self.lin1.collect_mut(out);
        self.lin2.collect_mut(out);
    }
}

// ---------------------------------------------------------------------------
// Sinusoidal positional encoding

pub fn positional_encoding(max_len: usize, dim: usize) -> Mat {
    let mut pe = Mat::zeros(max_len, dim);
    for pos in 0..max_len {
        for i in 0..dim / 2 {
            let angle = pos as f64 / 10000f64.powf(2.0 * i as f64 / dim as f64);
            *pe.at_mut(pos, 2 * i) = angle.sin();
            if 2 * i + 1 < dim {
                *pe.at_mut(pos, 2 * i + 1) = angle.cos();
            }
        }
    }
    pe
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn softmax_rows_sum_to_one() {
        let x = Mat::from_vec(2, 3, vec![1.0, 2.0, 3.0, -5.0, 0.0, 5.0]);
        let p = softmax_rows(&x);
        for r in 0..2 {
            let s: f64 = p.row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn masked_positions_get_zero_probability() {
        let mut scores = Mat::from_vec(2, 3, vec![0.5; 6]);
        apply_mask(&mut scores, AttnMask { causal: true, key_pad: None });
        let p = softmax_rows(&scores);
        assert_eq!(p.at(0, 1), 0.0);
        assert_eq!(p.at(0, 2), 0.0);
        assert_eq!(p.at(1, 2), 0.0);
        assert!(p.at(1, 0) > 0.0);
    }

    #[test]
    fn linear_backward_matches_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lin = Linear::new(4, 3, &mut rng);
        let x = randn_mat(5, 4, 1.0, &mut rng);
        // Loss = sum(y^2) / 2 so gy = y.
        let loss = |l: &Linear| -> f64 { l.forward(&x).frobenius_sq() / 2.0 };
        let y = lin.forward(&x);
        let mut grads = zeros_like(&lin);
        lin.backward(&x, &y, &mut grads);
        let mut probe = lin.clone();
        let h = 1e-6;
        for (pi, idx) in [(0usize, 5usize), (0, 0), (1, 2)] {
            let orig = probe.params()[pi].data[idx];
            probe.params_mut()[pi].data[idx] = orig + h;
            let up = loss(&probe);
            probe.params_mut()[pi].data[idx] = orig - h;
            let dn = loss(&probe);
            probe.params_mut()[pi].data[idx] = orig;
            let fd = (up - dn) / (2.0 * h);
            let ana = grads.params()[pi].data[idx];
            assert!((fd - ana).abs() < 1e-6 * fd.abs().max(1.0), "fd {fd} vs {ana}");
        }
    }
}
