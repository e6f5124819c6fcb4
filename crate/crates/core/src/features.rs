//! Unit descriptors and clustering.
//!
//! Each segmented unit is summarized by a 67-dimensional vector with a
//! frozen layout:
//!
//! | dims    | contents                                                    |
//! |---------|-------------------------------------------------------------|
//! | 0..9    | STE-curve stats: max, min, mean, std, skew, kurtosis, Q1, Q2, Q3 |
//! | 9..14   | spectral centroid, spread, entropy, skewness, kurtosis      |
//! | 14..28  | the same 14 descriptors on the first-differenced trace       |
//! | 28..42  | the same 14 on the second-differenced trace                  |
//! | 42..67  | mean energy of 25 equal-duration sub-segments of the raw trace |
//!
//! Skewness and kurtosis of (near-)constant series are defined as 0, and a
//! zero-power spectrum yields all-zero spectral descriptors. Kurtosis is
//! excess kurtosis. Sub-segment boundaries are `round(j*n/25)`, which makes
//! the partition symmetric under time reversal.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::segment::UnitSegment;
use crate::sim::derive_seed;

pub const FEATURE_DIM: usize = 67;
const N_SUBSEGMENTS: usize = 25;
/// Minimum samples for stable spectral descriptors.
pub const MIN_SEGMENT_SAMPLES: usize = 50;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("segment too short: need >= {need} samples, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("need at least {need} vectors, got {got}")]
    TooFewVectors { need: usize, got: usize },
    #[error("expected {expected}-dim vectors, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("k = {k} exceeds number of distinct vectors {distinct}")]
    KTooLarge { k: usize, distinct: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

/// Relative variance below this counts as constant (0/0 guard).
const VARIANCE_FLOOR: f64 = 1e-20;

fn moments(x: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for &v in x {
        let d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    (mean, m2 / n, m3 / n, m4 / n)
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = (sorted.len() - 1) as f64 * p;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Nine distribution statistics of a series: max, min, mean, std,
/// skewness, excess kurtosis, Q1, Q2, Q3.
fn time_stats(x: &[f64]) -> [f64; 9] {
    let (mean, m2, m3, m4) = moments(x);
    let scale = x.iter().fold(0.0_f64, |a, &v| a.max(v.abs())).max(1e-300);
    let constant = m2 <= VARIANCE_FLOOR * scale * scale;
    let std = if constant { 0.0 } else { m2.sqrt() };
    let skew = if constant { 0.0 } else { m3 / m2.powf(1.5) };
    let kurt = if constant { 0.0 } else { m4 / (m2 * m2) - 3.0 };
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    [
        *sorted.last().unwrap(),
        sorted[0],
        mean,
        std,
        skew,
        kurt,
        quantile(&sorted, 0.25),
        quantile(&sorted, 0.5),
        quantile(&sorted, 0.75),
    ]
}

/// Five shape descriptors of the one-sided power spectrum: centroid,
/// spread, entropy (base 2), skewness, excess kurtosis. Frequencies in Hz.
fn spectral_stats(x: &[f64], rate: f64) -> [f64; 5] {
    let n = x.len();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft.process(&mut buf);
    let half = n / 2 + 1;
    let power: Vec<f64> = buf[..half].iter().map(|c| c.norm_sqr()).collect();
    let total: f64 = power.iter().sum();
    if total <= 0.0 {
        return [0.0; 5];
    }
    let freqs: Vec<f64> = (0..half).map(|k| k as f64 * rate / n as f64).collect();
    let centroid: f64 = freqs.iter().zip(&power).map(|(f, p)| f * p).sum::<f64>() / total;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    let mut entropy = 0.0;
    for (f, p) in freqs.iter().zip(&power) {
        let w = p / total;
        let d = f - centroid;
        m2 += d * d * w;
        m3 += d * d * d * w;
        m4 += d * d * d * d * w;
        if w > 0.0 {
            entropy -= w * w.log2();
        }
    }
    let spread = m2.sqrt();
    let nyquist = rate / 2.0;
    let constant = m2 <= VARIANCE_FLOOR * nyquist * nyquist;
    let skew = if constant { 0.0 } else { m3 / m2.powf(1.5) };
    let kurt = if constant { 0.0 } else { m4 / (m2 * m2) - 3.0 };
    [centroid, if constant { 0.0 } else { spread }, entropy, skew, kurt]
}

/// The 14 descriptors (9 STE-curve stats + 5 spectral) of one signal.
fn descriptor_block(x: &[f64], rate: f64) -> [f64; 14] {
    let w = ((0.025 * rate).round() as usize).clamp(1, x.len() / 2);
    let ste: Vec<f64> = (0..x.len() - w + 1)
        .map(|t| x[t..t + w].iter().map(|v| v * v).sum())
        .collect();
    let t = time_stats(&ste);
    let s = spectral_stats(x, rate);
    let mut out = [0.0; 14];
    out[..9].copy_from_slice(&t);
    out[9..].copy_from_slice(&s);
    out
}

fn diff(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

/// The 67-dimensional descriptor of one unit segment.
pub fn extract_features(seg: &UnitSegment) -> Result<Vec<f64>, FeatureError> {
    let x = &seg.values.values;
    if x.len() < MIN_SEGMENT_SAMPLES {
        return Err(FeatureError::TooShort { need: MIN_SEGMENT_SAMPLES, got: x.len() });
    }
    let rate = seg.values.sample_rate_hz;
    let d1 = diff(x);
    let d2 = diff(&d1);
    let mut out = Vec::with_capacity(FEATURE_DIM);
    out.extend_from_slice(&descriptor_block(x, rate));
    out.extend_from_slice(&descriptor_block(&d1, rate));
    out.extend_from_slice(&descriptor_block(&d2, rate));
    let n = x.len();
    for j in 0..N_SUBSEGMENTS {
        let lo = (j as f64 * n as f64 / N_SUBSEGMENTS as f64).round() as usize;
        let hi = ((j + 1) as f64 * n as f64 / N_SUBSEGMENTS as f64).round() as usize;
        // Ascending summation makes the mean independent of sample order,
        // so time reversal permutes these dims bit-exactly.
        let mut sq: Vec<f64> = x[lo..hi].iter().map(|v| v * v).collect();
        sq.sort_by(|a, b| a.total_cmp(b));
        out.push(sq.iter().sum::<f64>() / sq.len() as f64);
    }
    debug_assert_eq!(out.len(), FEATURE_DIM);
    Ok(out)
}

/// Per-dimension z-score parameters fitted on a training set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Dimensions whose std collapsed to zero (std forced to 1).
    pub degenerate: Vec<usize>,
}

pub fn fit_scaler(vectors: &[Vec<f64>]) -> Result<FeatureScaler, FeatureError> {
    if vectors.len() < 2 {
        return Err(FeatureError::TooFewVectors { need: 2, got: vectors.len() });
    }
    let dim = vectors[0].len();
    for v in vectors {
        if v.len() != dim {
            return Err(FeatureError::DimensionMismatch { expected: dim, got: v.len() });
        }
    }
    let n = vectors.len() as f64;
    let mut mean = vec![0.0; dim];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0; dim];
    for v in vectors {
        for ((s, x), m) in var.iter_mut().zip(v).zip(&mean) {
            let d = x - m;
            *s += d * d;
        }
    }
    let mut degenerate = Vec::new();
    let std = var
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let sd = (s / n).sqrt();
            if sd < 1e-12 {
                degenerate.push(i);
                1.0
            } else {
                sd
            }
        })
        .collect();
    Ok(FeatureScaler { mean, std, degenerate })
}

pub fn apply_scaler(scaler: &FeatureScaler, v: &[f64]) -> Result<Vec<f64>, FeatureError> {
    if v.len() != scaler.mean.len() {
        return Err(FeatureError::DimensionMismatch {
            expected: scaler.mean.len(),
            got: v.len(),
        });
    }
    Ok(v
        .iter()
        .zip(&scaler.mean)
        .zip(&scaler.std)
        .map(|((x, m), s)| (x - m) / s)
        .collect())
}

/// Fitted k-means model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub seed: u64,
    pub inertia: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct KmeansOptions {
    pub max_iter: usize,
    /// Independent seeded restarts; the lowest-inertia run wins.
    pub n_init: usize,
}

impl Default for KmeansOptions {
    fn default() -> Self {
        Self { max_iter: 100, n_init: 16 }
    }
}

#[derive(Debug, Clone)]
pub struct KmeansFit {
    pub model: ClusterModel,
    pub assignments: Vec<usize>,
    /// Inertia after each Lloyd assignment step of the winning run.
    pub inertia_history: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centroids: &[Vec<f64>], v: &[f64]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, v);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    (best, best_d)
}

fn kmeans_pp_init(data: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(data[rng.random_range(0..data.len())].clone());
    let mut d2: Vec<f64> = data.iter().map(|v| sq_dist(v, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pick = data.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if r < w {
                    pick = i;
                    break;
                }
                r -= w;
            }
            pick
        } else {
            // All mass on chosen points (duplicates); take the first
            // point not yet at distance zero from every centroid.
            d2.iter().position(|&w| w > 0.0).unwrap_or(0)
        };
        centroids.push(data[next].clone());
        for (w, v) in d2.iter_mut().zip(data) {
            *w = w.min(sq_dist(v, centroids.last().unwrap()));
        }
    }
    centroids
}

fn lloyd(
    data: &[Vec<f64>],
    mut centroids: Vec<Vec<f64>>,
    max_iter: usize,
) -> (Vec<Vec<f64>>, Vec<usize>, f64, Vec<f64>) {
    let k = centroids.len();
    let dim = data[0].len();
    let mut assignments = vec![usize::MAX; data.len()];
    let mut history: Vec<f64> = Vec::new();
    for _ in 0..max_iter {
        let mut changed = false;
        let mut inertia = 0.0;
        for (a, v) in assignments.iter_mut().zip(data) {
            let (best, d) = nearest(&centroids, v);
            inertia += d;
            if *a != best {
                *a = best;
                changed = true;
            }
        }
        if let Some(&last) = history.last() {
            debug_assert!(inertia <= last + 1e-9 * last.abs().max(1.0));
        }
        history.push(inertia);
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (a, v) in assignments.iter().zip(data) {
            counts[*a] += 1;
            for (s, x) in sums[*a].iter_mut().zip(v) {
                *s += x;
            }
        }
        for (c, (sum, count)) in centroids.iter_mut().zip(sums.iter().zip(&counts)) {
            if *count > 0 {
                for (slot, s) in c.iter_mut().zip(sum) {
                    *slot = s / *count as f64;
                }
            }
            // Empty clusters keep their previous centroid.
        }
    }
    let inertia = *history.last().unwrap();
    (centroids, assignments, inertia, history)
}

/// Lloyd iterations from seeded k-means++ starts. Deterministic for fixed
/// (data, k, seed): restarts use seeds derived from `seed` and the best
/// run by final inertia wins (ties go to the earlier run).
pub fn kmeans(
    data: &[Vec<f64>],
    k: usize,
    seed: u64,
    opts: KmeansOptions,
) -> Result<KmeansFit, FeatureError> {
    if k < 1 {
        return Err(FeatureError::InvalidParam("k must be >= 1".into()));
    }
    if data.is_empty() {
        return Err(FeatureError::TooFewVectors { need: 1, got: 0 });
    }
    let dim = data[0].len();
    for v in data {
        if v.len() != dim {
            return Err(FeatureError::DimensionMismatch { expected: dim, got: v.len() });
        }
    }
    let mut distinct: Vec<&Vec<f64>> = data.iter().collect();
    distinct.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| *o != std::cmp::Ordering::Equal)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    distinct.dedup_by(|a, b| a == b);
    if k > distinct.len() {
        return Err(FeatureError::KTooLarge { k, distinct: distinct.len() });
    }

    let mut best: Option<KmeansFit> = None;
    for run in 0..opts.n_init.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, run as u64));
        let init = kmeans_pp_init(data, k, &mut rng);
        let (centroids, assignments, inertia, history) = lloyd(data, init, opts.max_iter);
        let better = match &best {
            None => true,
            Some(b) => inertia < b.model.inertia,
        };
        if better {
            best = Some(KmeansFit {
                model: ClusterModel { k, centroids, seed, inertia },
                assignments,
                inertia_history: history,
            });
        }
    }
    Ok(best.unwrap())
}

/// Nearest centroid by Euclidean distance; ties break to the lowest id.
pub fn predict(model: &ClusterModel, v: &[f64]) -> usize {
    nearest(&model.centroids, v).0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PseudoLabels {
    pub labels: Vec<usize>,
    /// Count of units per cluster id.
    pub distribution: Vec<usize>,
}

/// Label every vector with its cluster id and report the distribution.
pub fn assign_pseudo_labels(model: &ClusterModel, vectors: &[Vec<f64>]) -> PseudoLabels {
    let labels: Vec<usize> = vectors.iter().map(|v| predict(model, v)).collect();
    let mut distribution = vec![0usize; model.k];
    for &l in &labels {
        distribution[l] += 1;
    }
    PseudoLabels { labels, distribution }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::RealSeries;
    use approx::assert_relative_eq;

    fn segment_of(values: Vec<f64>, rate: f64) -> UnitSegment {
        UnitSegment {
            start_s: 0.0,
            end_s: values.len() as f64 / rate,
            values: RealSeries::new(values, rate),
            source_utterance: String::new(),
        }
    }

    #[test]
    fn constant_trace_conventions() {
        let seg = segment_of(vec![0.7; 100], 1000.0);
        let f = extract_features(&seg).unwrap();
        assert_eq!(f.len(), FEATURE_DIM);
        // STE std/skew/kurt of a constant curve are zero by convention.
        assert_eq!(f[3], 0.0);
        assert_eq!(f[4], 0.0);
        assert_eq!(f[5], 0.0);
        // All 25 sub-segment means identical.
        for j in 43..67 {
            assert_eq!(f[j], f[42]);
        }
        // Differenced signals are all-zero: spectral block is zeroed.
        for j in 23..28 {
            assert_eq!(f[j], 0.0);
        }
    }

    #[test]
    fn pure_tone_spectral_centroid() {
        let rate = 1000.0;
        let n = 500;
        let f0 = 40.0; // exactly 20 periods in 500 samples
        let seg = segment_of(
            (0..n)
                .map(|k| (2.0 * std::f64::consts::PI * f0 * k as f64 / rate).sin())
                .collect(),
            rate,
        );
        let f = extract_features(&seg).unwrap();
        let bin_hz = rate / n as f64;
        assert!((f[9] - f0).abs() < bin_hz, "centroid {} vs {f0}", f[9]);
        assert!(f[10] < 2.0 * bin_hz, "spread {} bins", f[10] / bin_hz);
    }

    #[test]
    fn time_reversal_symmetry() {
        let rate = 1000.0;
        let n = 103; // not a multiple of 25: exercises the partition rounding
        let values: Vec<f64> = (0..n)
            .map(|k| {
                let t = k as f64 / rate;
                (2.0 * std::f64::consts::PI * 18.0 * t).sin() * (1.0 + 3.0 * t)
            })
            .collect();
        let mut reversed = values.clone();
        reversed.reverse();
        let a = extract_features(&segment_of(values, rate)).unwrap();
        let b = extract_features(&segment_of(reversed, rate)).unwrap();
        // Distribution stats of the STE curve are order-free.
        for i in 0..9 {
            assert_relative_eq!(a[i], b[i], max_relative = 1e-9, epsilon = 1e-12);
        }
        // Sub-segment means appear in reverse order, exactly.
        for j in 0..25 {
            assert_eq!(a[42 + j], b[42 + 24 - j], "sub-segment {j}");
        }
    }

    #[test]
    fn too_short_segment_rejected() {
        let seg = segment_of(vec![0.1; 49], 1000.0);
        assert!(matches!(extract_features(&seg), Err(FeatureError::TooShort { .. })));
    }

    fn demo_vectors() -> Vec<Vec<f64>> {
        (0..12)
            .map(|i| {
                let x = i as f64;
                vec![x, 2.0 * x * x - 3.0, (x * 0.7).sin(), 5.0]
            })
            .collect()
    }

    #[test]
    fn scaler_normalizes_fit_set() {
        let vectors = demo_vectors();
        let scaler = fit_scaler(&vectors).unwrap();
        assert_eq!(scaler.degenerate, vec![3]); // constant column
        let scaled: Vec<Vec<f64>> =
            vectors.iter().map(|v| apply_scaler(&scaler, v).unwrap()).collect();
        let n = scaled.len() as f64;
        for d in 0..4 {
            let mean: f64 = scaled.iter().map(|v| v[d]).sum::<f64>() / n;
            let var: f64 = scaled.iter().map(|v| (v[d] - mean) * (v[d] - mean)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-9, "dim {d} mean {mean}");
            if d != 3 {
                assert!((var.sqrt() - 1.0).abs() < 1e-9, "dim {d} std {}", var.sqrt());
            } else {
                assert!(var.sqrt() < 1e-12);
            }
        }
    }

    #[test]
    fn scaler_is_affine() {
        let vectors = demo_vectors();
        let scaler = fit_scaler(&vectors).unwrap();
        let v = &vectors[5];
        let a = 3.5;
        let av: Vec<f64> = v.iter().map(|x| a * x).collect();
        let lhs = apply_scaler(&scaler, &av).unwrap();
        let rhs = apply_scaler(&scaler, v).unwrap();
        for d in 0..4 {
            let expected = rhs[d] + (a - 1.0) * v[d] / scaler.std[d];
            assert_relative_eq!(lhs[d], expected, max_relative = 1e-12, epsilon = 1e-12);
        }
    }

    #[test]
    fn scaler_single_repeated_vector() {
        let vectors = vec![vec![1.0, -2.0], vec![1.0, -2.0], vec![1.0, -2.0]];
        let scaler = fit_scaler(&vectors).unwrap();
        assert_eq!(scaler.degenerate, vec![0, 1]);
        let out = apply_scaler(&scaler, &vectors[0]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    fn blob(center: (f64, f64), spread: f64, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                vec![
                    center.0 + spread * (rng.random::<f64>() - 0.5),
                    center.1 + spread * (rng.random::<f64>() - 0.5),
                ]
            })
            .collect()
    }

    #[test]
    fn kmeans_separates_two_blobs() {
        let mut data = blob((0.0, 0.0), 1.0, 20, 1);
        data.extend(blob((100.0, 100.0), 1.0, 25, 2));
        let fit = kmeans(&data, 2, 9, KmeansOptions::default()).unwrap();
        let first = fit.assignments[0];
        assert!(fit.assignments[..20].iter().all(|&a| a == first));
        assert!(fit.assignments[20..].iter().all(|&a| a != first));
    }

    #[test]
    fn kmeans_k1_is_global_mean() {
        let data = demo_vectors();
        let fit = kmeans(&data, 1, 0, KmeansOptions::default()).unwrap();
        let n = data.len() as f64;
        for d in 0..4 {
            let mean: f64 = data.iter().map(|v| v[d]).sum::<f64>() / n;
            assert_relative_eq!(fit.model.centroids[0][d], mean, max_relative = 1e-12);
        }
    }

    /// Exhaustive minimum inertia over all 2-partitions.
    fn exhaustive_two_partition_inertia(data: &[Vec<f64>]) -> f64 {
        let n = data.len();
        let dim = data[0].len();
        let mut best = f64::INFINITY;
        // Point 0 stays in side A to halve the enumeration.
        for mask in 0..(1u32 << (n - 1)) {
            let sides: Vec<usize> = (0..n)
                .map(|i| if i == 0 { 0 } else { ((mask >> (i - 1)) & 1) as usize })
                .collect();
            if sides.iter().all(|&s| s == 0) || sides.iter().all(|&s| s == 1) {
                continue;
            }
            let mut sums = [vec![0.0; dim], vec![0.0; dim]];
            let mut counts = [0usize; 2];
            for (s, v) in sides.iter().zip(data) {
                counts[*s] += 1;
                for (a, x) in sums[*s].iter_mut().zip(v) {
                    *a += x;
                }
            }
            let mut inertia = 0.0;
            for (s, v) in sides.iter().zip(data) {
                inertia += v
                    .iter()
                    .zip(&sums[*s])
                    .map(|(x, sum)| {
                        let c = sum / counts[*s] as f64;
                        (x - c) * (x - c)
                    })
                    .sum::<f64>();
            }
            best = best.min(inertia);
        }
        best
    }

    #[test]
    fn kmeans_matches_exhaustive_optimum() {
        for seed in 0..25 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 4 + (seed as usize % 3);
            let data: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0])
                .collect();
            let fit = kmeans(&data, 2, seed, KmeansOptions::default()).unwrap();
            let oracle = exhaustive_two_partition_inertia(&data);
            assert!(
                (fit.model.inertia - oracle).abs() <= 1e-9,
                "seed {seed}: kmeans {} vs oracle {oracle}",
                fit.model.inertia
            );
        }
    }

    #[test]
    fn kmeans_deterministic_and_monotone() {
        let mut data = blob((0.0, 5.0), 4.0, 30, 3);
        data.extend(blob((8.0, -2.0), 4.0, 30, 4));
        let a = kmeans(&data, 4, 42, KmeansOptions::default()).unwrap();
        let b = kmeans(&data, 4, 42, KmeansOptions::default()).unwrap();
        assert_eq!(a.model.centroids, b.model.centroids);
        assert_eq!(a.assignments, b.assignments);
        for w in a.inertia_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "history not monotone: {:?}", a.inertia_history);
        }
    }

    #[test]
    fn kmeans_rejects_k_above_distinct() {
        let data = vec![vec![1.0, 1.0], vec![1.0, 1.0], vec![2.0, 2.0]];
        assert!(matches!(
            kmeans(&data, 3, 0, KmeansOptions::default()),
            Err(FeatureError::KTooLarge { .. })
        ));
        assert!(kmeans(&data, 2, 0, KmeansOptions::default()).is_ok());
    }

    #[test]
    fn pseudo_labels_consistency_and_margin() {
        let mut data = blob((0.0, 0.0), 1.0, 15, 5);
        data.extend(blob((50.0, 0.0), 1.0, 15, 6));
        let fit = kmeans(&data, 2, 7, KmeansOptions::default()).unwrap();
        let labels = assign_pseudo_labels(&fit.model, &data);
        assert_eq!(labels.labels, fit.assignments);
        assert_eq!(labels.distribution.iter().sum::<usize>(), data.len());

        // A small perturbation keeps the label.
        let eps = 0.01;
        let mut v = data[3].clone();
        v[0] += eps;
        v[1] -= eps;
        assert_eq!(predict(&fit.model, &v), fit.assignments[3]);

        // Permuting centroids permutes labels identically.
        let permuted = ClusterModel {
            k: 2,
            centroids: vec![fit.model.centroids[1].clone(), fit.model.centroids[0].clone()],
            seed: 7,
            inertia: fit.model.inertia,
        };
        for (v, &orig) in data.iter().zip(&fit.assignments) {
            assert_eq!(predict(&permuted, v), 1 - orig);
        }
    }

    #[test]
    fn feature_vector_golden_layout() {
        // Frozen reference vector: any layout or formula change must be
        // deliberate and update these values.
        let rate = 1000.0;
        let n = 120;
        let values: Vec<f64> = (0..n)
            .map(|k| {
                let t = k as f64 / rate;
                (2.0 * std::f64::consts::PI * 20.0 * t).sin()
                    + 0.5 * (2.0 * std::f64::consts::PI * 45.0 * t + 0.3).cos()
            })
            .collect();
        let f = extract_features(&segment_of(values, rate)).unwrap();
        assert_eq!(f.len(), FEATURE_DIM);
        let golden = golden_reference();
        for (i, (got, want)) in f.iter().zip(&golden).enumerate() {
            assert_relative_eq!(got, want, max_relative = 1e-9, epsilon = 1e-12);

            let _ = i;
        }
    }

    fn golden_reference() -> Vec<f64> {
        // Computed by this implementation at freeze time.
        GOLDEN.to_vec()
    }

    const GOLDEN: [f64; FEATURE_DIM] = [
        23.267773759737718, 7.216172564185182, 15.81877360018422, 4.478550673433202,
        0.005574909346839718, -1.1719663619076035, 12.174250222681042, 15.716643667408096,
        19.66782810741058, 22.61421703693197, 13.538571589791307, 2.2272166597963015,
        3.829638554262988, 75.6966243655978, 0.6873388225181103, 0.13283682915347653,
        0.45075225838400906, 0.15184937476417443, -0.31879135949040055, -1.0220043747282475,
        0.3195600400069013, 0.47408676290012675, 0.5759181184710116, 38.06452704085624,
        30.318884457675658, 2.492494278133157, 7.909513834298775, 87.35902458568944,
        0.030807304835333872, 0.010684983838538104, 0.022965744262627943, 0.005757022930557891,
        -0.259851511579448, -1.1052538321802776, 0.01803825063781147, 0.023153281141471208,
        0.028752625579006753, 43.0436364155678, 28.34373103461968, 2.1117808978901578,
        8.425628427518177, 100.46624022774093, 0.29671060254202086, 0.21143250949989004,
        0.30484762413373034, 0.9005934833846151, 0.8962394072462867, 0.13190264182916872,
        1.2613062474416195, 1.569981145562937, 0.4939231620724838, 0.03104999222033311,
        0.018692126524161252, 0.04435664707128597, 0.7587687825866365, 1.9117345262421979,
        0.9621891803430197, 0.13832726937576437, 0.7121421313559602, 0.5043644079775667,
        0.27281699647423474, 0.5080914855098191, 0.49119985234162017, 0.14434382293482179,
        1.375396436101471, 1.900116197493191, 0.5010329986931357,
    ];
}
