//! Lip-motion unit segmentation.
//!
//! Coarse pass: a short sliding window of mean power is compared against a
//! trailing long-window baseline; runs of active samples become candidate
//! regions. The baseline is a trailing-window median, which stays pinned to
//! the idle level even while a burst sits inside the window (a trailing
//! mean drifts upward and clips the falling edge of every unit). Spans
//! shorter than the long window fall back to the global-mean baseline.
//!
//! Fine pass: within each region, a finer short-time-energy curve is
//! scanned for prominent peaks; a boundary is inserted at the valley
//! between adjacent peaks whose values differ by more than an adaptive
//! threshold.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::isolate::MotionTrace;
use crate::signal::RealSeries;

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("empty trace")]
    EmptyTrace,
}

/// Segmenter thresholds. Window defaults follow the two-stage search
/// (0.2 s / 5 s coarse, 0.1 s fine) with lambda1 = 0.1 and lambda2 = 0.3.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SegmenterParams {
    pub w_s: f64,
    pub w_l: f64,
    pub w_f: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Coarse regions shorter than this are dropped as noise.
    pub min_region_s: f64,
    /// Margin over the trailing-median floor. The median of squared
    /// Gaussian noise sits at 0.455x its mean, so a plain comparison would
    /// keep the mask active on noise alone; 4x clears the short-window
    /// fluctuation band.
    pub activity_ratio: f64,
}

impl Default for SegmenterParams {
    fn default() -> Self {
        Self {
            w_s: 0.2,
            w_l: 5.0,
            w_f: 0.1,
            lambda1: 0.1,
            lambda2: 0.3,
            min_region_s: 0.05,
            activity_ratio: 4.0,
        }
    }
}

impl SegmenterParams {
    pub fn validate(&self) -> Result<(), SegmentError> {
        if !(self.w_s > 0.0 && self.w_l > self.w_s && self.w_f > 0.0) {
            return Err(SegmentError::InvalidParam("need 0 < w_f, 0 < w_s < w_l".into()));
        }
        if !(0.0 < self.lambda1 && self.lambda1 < 1.0) {
            return Err(SegmentError::InvalidParam("lambda1 must be in (0, 1)".into()));
        }
        if !(0.0 < self.lambda2 && self.lambda2 < 1.0) {
            return Err(SegmentError::InvalidParam("lambda2 must be in (0, 1)".into()));
        }
        if self.activity_ratio <= 0.0 {
            return Err(SegmentError::InvalidParam("activity_ratio must be positive".into()));
        }
        Ok(())
    }
}

/// One candidate lip-motion unit, with its slice of the trace.
#[derive(Debug, Clone)]
pub struct UnitSegment {
    pub start_s: f64,
    pub end_s: f64,
    pub values: RealSeries,
    pub source_utterance: String,
}

#[derive(Debug, Clone, Default)]
pub struct SegmentationResult {
    pub segments: Vec<UnitSegment>,
    /// Set when a span was shorter than the long window and the
    /// global-mean baseline was used instead.
    pub used_global_baseline: bool,
}

/// Relative margin guarding the activity comparison against float rounding
/// on flat traces; keeps amplitude-scale invariance exact.
const BASELINE_MARGIN: f64 = 1e-9;

fn upper_median(scratch: &mut [f64]) -> f64 {
    let mid = scratch.len() / 2;
    let (_, m, _) = scratch.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    *m
}

/// Centered moving average; peak analysis runs on the smoothed STE curve
/// so noise micro-peaks on burst slopes do not spawn boundaries.
fn moving_average(x: &[f64], len: usize) -> Vec<f64> {
    if len <= 1 || x.is_empty() {
        return x.to_vec();
    }
    let half = len / 2;
    let n = x.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &v in x {
        acc += v;
        prefix.push(acc);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Strict local maxima of `ste`, with plateaus collapsing to their first
/// index. Endpoints count when they dominate their single neighbor.
fn local_maxima(ste: &[f64]) -> Vec<usize> {
    let n = ste.len();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![0];
    }
    let mut peaks = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && ste[j + 1] == ste[i] {
            j += 1;
        }
        let left_ok = i == 0 || ste[i - 1] < ste[i];
        let right_ok = j == n - 1 || ste[j + 1] < ste[i];
        if left_ok && right_ok {
            peaks.push(i);
        }
        i = j + 1;
    }
    peaks
}

/// Segment one gap-free span; indices in the returned pairs are
/// span-relative sample offsets.
fn segment_span(
    values: &[f64],
    rate: f64,
    p: &SegmenterParams,
    used_global: &mut bool,
) -> Vec<(usize, usize)> {
    let n = values.len();
    let ws = ((p.w_s * rate).round() as usize).max(1);
    let wl = ((p.w_l * rate).round() as usize).max(2);
    let wf = ((p.w_f * rate).round() as usize).max(1);
    let min_region = ((p.min_region_s * rate).round() as usize).max(1);
    if n < 2 {
        return Vec::new();
    }

    let power: Vec<f64> = values.iter().map(|v| v * v).collect();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &v in &power {
        acc += v;
        prefix.push(acc);
    }
    let mean_power = |lo: usize, hi: usize| (prefix[hi] - prefix[lo]) / (hi - lo) as f64;

    // Short-window mean power, centered.
    let hs = ws / 2;
    let e_s: Vec<f64> = (0..n)
        .map(|i| mean_power(i.saturating_sub(hs), (i + hs + 1).min(n)))
        .collect();

    // Long-window baseline, trailing (causal). The median floor gets the
    // activity margin; the global-mean fallback already sits between the
    // floor and the signal level, so it is compared directly.
    let e_l: Vec<f64> = if n < wl {
        *used_global = true;
        let global = mean_power(0, n);
        vec![global; n]
    } else {
        // Trailing-window median on a stride grid, sample-and-hold.
        let stride = (ws / 8).max(1);
        let mut out = vec![0.0; n];
        let mut scratch = Vec::with_capacity(wl);
        let mut g = 0;
        while g < n {
            let lo = g.saturating_sub(wl);
            let hi = g.max(1);
            scratch.clear();
            scratch.extend_from_slice(&power[lo..hi]);
            let med = upper_median(&mut scratch) * p.activity_ratio;
            for slot in out.iter_mut().take((g + stride).min(n)).skip(g) {
                *slot = med;
            }
            g += stride;
        }
        out
    };

    // Activity mask and coarse regions.
    let mut regions: Vec<(usize, usize)> = Vec::new();
    let mut start = None;
    for i in 0..n {
        let active = e_s[i] > e_l[i] * (1.0 + BASELINE_MARGIN);
        match (active, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                regions.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        regions.push((s, n));
    }
    regions.retain(|&(a, b)| b - a >= min_region);

    // Fine refinement: peak/valley analysis of the STE curve per region.
    let mut segments = Vec::new();
    for &(a, b) in &regions {
        let region = &power[a..b];
        let rn = region.len();
        if rn <= wf {
            segments.push((a, b));
            continue;
        }
        let mut rp = Vec::with_capacity(rn + 1);
        rp.push(0.0);
        let mut acc = 0.0;
        for &v in region {
            acc += v;
            rp.push(acc);
        }
        let raw_ste: Vec<f64> = (0..rn - wf + 1).map(|j| rp[j + wf] - rp[j]).collect();
        let ste = moving_average(&raw_ste, wf);
        let ste_max = ste.iter().cloned().fold(f64::MIN, f64::max);
        let ste_min = ste.iter().cloned().fold(f64::MAX, f64::min);
        let peaks: Vec<usize> = local_maxima(&ste)
            .into_iter()
            .filter(|&j| ste[j] > p.lambda1 * ste_max)
            .collect();
        let delta = p.lambda2 * (ste_max - ste_min);

        let mut cuts = Vec::new();
        for w in peaks.windows(2) {
            let (tau_a, tau_b) = (w[0], w[1]);
            if (ste[tau_b] - ste[tau_a]).abs() > delta {
                // Valley between the peaks; earliest index on ties.
                let mut v = tau_a;
                for j in tau_a..=tau_b {
                    if ste[j] < ste[v] {
                        v = j;
                    }
                }
                // STE index j covers samples [j, j + wf): center-align.
                cuts.push(a + v + wf / 2);
            }
        }
        let mut edges = vec![a];
        edges.extend(cuts);
        edges.push(b);
        edges.dedup();
        for w in edges.windows(2) {
            if w[1] > w[0] {
                segments.push((w[0], w[1]));
            }
        }
    }
    segments
}

/// Run the two-stage segmenter over every gap-free span of the trace.
/// Output segments are sorted, disjoint, and never cross a gap.
pub fn segment_units(
    trace: &MotionTrace,
    p: &SegmenterParams,
) -> Result<SegmentationResult, SegmentError> {
    p.validate()?;
    if trace.values.is_empty() {
        return Err(SegmentError::EmptyTrace);
    }
    let rate = trace.values.sample_rate_hz;
    let mut result = SegmentationResult::default();
    for (lo, hi) in trace.spans() {
        let span = &trace.values.values[lo..hi];
        for (a, b) in segment_span(span, rate, p, &mut result.used_global_baseline) {
            let (abs_a, abs_b) = (lo + a, lo + b);
            result.segments.push(UnitSegment {
                start_s: abs_a as f64 / rate,
                end_s: abs_b as f64 / rate,
                values: RealSeries::new(trace.values.values[abs_a..abs_b].to_vec(), rate),
                source_utterance: String::new(),
            });
        }
    }
    Ok(result)
}
