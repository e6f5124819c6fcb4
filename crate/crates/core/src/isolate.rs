//! Recovering the lip-motion trace from a raw recording.
//!
//! The chain: downconvert the first-order tag sideband to DC and low-pass
//! it, decimate to the trace rate, take sample-to-sample phase differences,
//! smooth and low-pass to the lip-motion band, discard bursty windows by a
//! median/MAD gate, and separate physiological drift from articulation with
//! variational mode decomposition, keeping the modes whose center
//! frequencies fall in the lip-motion band.

use num_complex::Complex64;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{
    fir_filter, fir_filter_iq, frequency_shift, Band, IqRecording, RealSeries, SignalError,
};

pub const DEFAULT_ISOLATION_TAPS: usize = 255;

#[derive(Debug, Error)]
pub enum IsolationError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("bandwidth {bandwidth_hz} Hz would leak the direct path (needs < 2 x {delta_f1_hz} Hz)")]
    DcLeak { bandwidth_hz: f64, delta_f1_hz: f64 },
    #[error("input too short: {0}")]
    TooShort(String),
    #[error("non-finite input sample at index {0}")]
    NonFinite(usize),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Downconvert by the tag switching frequency and low-pass to
/// `bandwidth_hz`, leaving a signal dominated by tag-path variations.
pub fn isolate_backscatter(
    r: &IqRecording,
    delta_f1_hz: f64,
    bandwidth_hz: f64,
) -> Result<IqRecording, IsolationError> {
    check_isolation_band(r.sample_rate_hz, delta_f1_hz, bandwidth_hz)?;
    let shifted = frequency_shift(r, delta_f1_hz)?;
    Ok(fir_filter_iq(&shifted, Band::low_pass(bandwidth_hz / 2.0), DEFAULT_ISOLATION_TAPS)?)
}

fn check_isolation_band(
    fs: f64,
    delta_f1_hz: f64,
    bandwidth_hz: f64,
) -> Result<(), IsolationError> {
    if delta_f1_hz <= 0.0 || bandwidth_hz <= 0.0 {
        return Err(IsolationError::InvalidParam(
            "delta_f1 and bandwidth must be positive".into(),
        ));
    }
    if delta_f1_hz + bandwidth_hz / 2.0 >= fs / 2.0 {
        return Err(IsolationError::InvalidParam(format!(
            "band around {delta_f1_hz} Hz exceeds Nyquist {}",
            fs / 2.0
        )));
    }
    if bandwidth_hz >= 2.0 * delta_f1_hz {
        return Err(IsolationError::DcLeak { bandwidth_hz, delta_f1_hz });
    }
    Ok(())
}

/// Phase-difference trace and the count of zero-magnitude products that
/// were emitted as zeros.
#[derive(Debug, Clone)]
pub struct PhaseDifference {
    pub series: RealSeries,
    pub zero_magnitude_count: usize,
}

/// `angle(s[t] * conj(s[t-1]))` in (-pi, pi]; length is input length - 1.
pub fn phase_difference(s: &IqRecording) -> Result<PhaseDifference, IsolationError> {
    if s.len() < 2 {
        return Err(IsolationError::TooShort("phase difference needs >= 2 samples".into()));
    }
    let mut zero_magnitude_count = 0;
    let values = s
        .samples
        .windows(2)
        .map(|w| {
            let prod = w[1] * w[0].conj();
            if prod.norm_sqr() == 0.0 {
                zero_magnitude_count += 1;
                0.0
            } else {
                let a = prod.arg();
                if a == -std::f64::consts::PI {
                    std::f64::consts::PI
                } else {
                    a
                }
            }
        })
        .collect();
    Ok(PhaseDifference {
        series: RealSeries::new(values, s.sample_rate_hz),
        zero_magnitude_count,
    })
}

/// Per-window RMS gate decisions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GateReport {
    pub window_len_s: f64,
    pub alpha: f64,
    /// RMS of the phase-difference trace per window.
    pub g: Vec<f64>,
    pub kept: Vec<usize>,
    pub discarded: Vec<usize>,
    pub threshold: f64,
    /// True when fewer than 3 windows were available and gating was skipped.
    pub disabled: bool,
}

fn median_of(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    median_of(&v)
}

pub fn median_abs_deviation(values: &[f64]) -> f64 {
    let med = median(values);
    let devs: Vec<f64> = values.iter().map(|v| (v - med).abs()).collect();
    median(&devs)
}

/// Discard windows whose RMS exceeds `median(g) + alpha * MAD(g)`. With
/// fewer than 3 windows the gate is disabled and everything is kept.
pub fn mad_gate(dphi: &RealSeries, window_s: f64, alpha: f64) -> Result<GateReport, IsolationError> {
    if window_s <= 0.0 {
        return Err(IsolationError::InvalidParam("window_s must be positive".into()));
    }
    if alpha <= 0.0 {
        return Err(IsolationError::InvalidParam("alpha must be positive".into()));
    }
    let win = (window_s * dphi.sample_rate_hz).round().max(1.0) as usize;
    let n_windows = dphi.values.len().div_ceil(win);
    let g: Vec<f64> = (0..n_windows)
        .map(|w| {
            let slice = &dphi.values[w * win..((w + 1) * win).min(dphi.values.len())];
            (slice.iter().map(|v| v * v).sum::<f64>() / slice.len() as f64).sqrt()
        })
        .collect();
    if n_windows < 3 {
        return Ok(GateReport {
            window_len_s: window_s,
            alpha,
            kept: (0..n_windows).collect(),
            discarded: Vec::new(),
            threshold: f64::INFINITY,
            disabled: true,
            g,
        });
    }
    let med = median(&g);
    let mad = median_abs_deviation(&g);
    let threshold = med + alpha * mad;
    let (mut kept, mut discarded) = (Vec::new(), Vec::new());
    for (w, &v) in g.iter().enumerate() {
        if v > threshold {
            discarded.push(w);
        } else {
            kept.push(w);
        }
    }
    Ok(GateReport {
        window_len_s: window_s,
        alpha,
        g,
        kept,
        discarded,
        threshold,
        disabled: false,
    })
}

/// Narrow-band modes with their center frequencies.
#[derive(Debug, Clone)]
pub struct VmdResult {
    /// K x N mode signals, ordered by ascending center frequency.
    pub modes: Vec<Vec<f64>>,
    pub center_freqs_hz: Vec<f64>,
    pub penalty: f64,
    pub iterations: usize,
    pub converged: bool,
    /// input - sum(modes), so modes + residual always reconstruct the input.
    pub residual: Vec<f64>,
    pub sample_rate_hz: f64,
}

impl VmdResult {
    pub fn mode_series(&self, k: usize) -> RealSeries {
        RealSeries::new(self.modes[k].clone(), self.sample_rate_hz)
    }
}

/// Variational mode decomposition: alternating Wiener-filter mode updates
/// and spectral-centroid center-frequency updates in the Fourier domain,
/// over a mirror-extended signal.
pub fn vmd(
    x: &RealSeries,
    k_modes: usize,
    penalty: f64,
    tol: f64,
    max_iter: usize,
) -> Result<VmdResult, IsolationError> {
    if k_modes < 1 {
        return Err(IsolationError::InvalidParam("K must be >= 1".into()));
    }
    if penalty <= 0.0 || tol <= 0.0 {
        return Err(IsolationError::InvalidParam("penalty and tol must be positive".into()));
    }
    if x.values.len() < 4 {
        return Err(IsolationError::TooShort("vmd needs >= 4 samples".into()));
    }
    if let Some(bad) = x.values.iter().position(|v| !v.is_finite()) {
        return Err(IsolationError::NonFinite(bad));
    }

    let t_len = x.values.len();
    let left = t_len / 2;
    let right = t_len - left;
    let n = 2 * t_len;

    // Mirror extension halves boundary effects on the outer modes.
    let mut extended = Vec::with_capacity(n);
    extended.extend(x.values[..left].iter().rev());
    extended.extend(&x.values);
    extended.extend(x.values[t_len - right..].iter().rev());

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let mut buf: Vec<Complex<f64>> =
        extended.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft.process(&mut buf);

    // Shifted spectrum: index i holds frequency (i - n/2) / n cycles/sample.
    let half = n / 2;
    let mut f_hat = vec![Complex::new(0.0, 0.0); n];
    for (i, v) in buf.iter().enumerate() {
        f_hat[(i + half) % n] = *v;
    }
    // One-sided analysis: drop strictly negative frequencies.
    for v in f_hat.iter_mut().take(half) {
        *v = Complex::new(0.0, 0.0);
    }
    let freqs: Vec<f64> = (0..n).map(|i| (i as f64 - half as f64) / n as f64).collect();

    let mut u_hat = vec![vec![Complex::new(0.0, 0.0); n]; k_modes];
    let mut omega: Vec<f64> = (0..k_modes).map(|k| 0.5 * k as f64 / k_modes as f64).collect();
    let mut sum_all = vec![Complex::new(0.0, 0.0); n];

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut diff_num = 0.0;
        let mut diff_den = 0.0;
        for k in 0..k_modes {
            let mut power_sum = 0.0;
            let mut centroid = 0.0;
            for i in half..n {
                let others = sum_all[i] - u_hat[k][i];
                let wiener = 1.0 + 2.0 * penalty * (freqs[i] - omega[k]).powi(2);
                let updated = (f_hat[i] - others) / wiener;
                let delta = updated - u_hat[k][i];
                diff_num += delta.norm_sqr();
                diff_den += u_hat[k][i].norm_sqr();
                sum_all[i] += delta;
                u_hat[k][i] = updated;
                let p = updated.norm_sqr();
                power_sum += p;
                centroid += freqs[i] * p;
            }
            if power_sum > 0.0 {
                omega[k] = centroid / power_sum;
            }
        }
        iterations += 1;
        if diff_num <= tol * (diff_den + f64::EPSILON) {
            converged = true;
            break;
        }
    }

    // Sort modes by center frequency before reconstruction.
    let mut order: Vec<usize> = (0..k_modes).collect();
    order.sort_by(|&a, &b| omega[a].partial_cmp(&omega[b]).unwrap());

    let ifft = planner.plan_fft_inverse(n);
    let mut modes = Vec::with_capacity(k_modes);
    let mut center_freqs_hz = Vec::with_capacity(k_modes);
    for &k in &order {
        // Hermitian completion of the one-sided spectrum.
        let mut full = u_hat[k].clone();
        for i in 1..half {
            full[i] = full[n - i].conj();
        }
        full[0] = full[n - 1].conj();
        // Undo the shift, invert, take the real part, crop the mirrors.
        let mut time = vec![Complex::new(0.0, 0.0); n];
        for (i, v) in full.iter().enumerate() {
            time[(i + half) % n] = *v;
        }
        ifft.process(&mut time);
        let scale = 1.0 / n as f64;
        modes.push(
            time[left..left + t_len]
                .iter()
                .map(|c| c.re * scale)
                .collect::<Vec<f64>>(),
        );
        center_freqs_hz.push(omega[k] * x.sample_rate_hz);
    }

    let mut residual = x.values.clone();
    for mode in &modes {
        for (r, m) in residual.iter_mut().zip(mode) {
            *r -= m;
        }
    }
    Ok(VmdResult {
        modes,
        center_freqs_hz,
        penalty,
        iterations,
        converged,
        residual,
        sample_rate_hz: x.sample_rate_hz,
    })
}

/// Isolation bookkeeping carried with each trace.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TraceProvenance {
    pub delta_f1_hz: Option<f64>,
    pub filter_band: Option<Band>,
    pub vmd_modes_kept: Vec<usize>,
    pub vmd_center_freqs_hz: Vec<f64>,
    /// Set when no mode fell inside the keep band.
    pub no_articulation: bool,
    pub zero_magnitude_samples: usize,
}

/// Clean lip-motion trace: values at the trace rate, plus intervals
/// discarded by the gate. Values inside gaps are zeroed.
#[derive(Debug, Clone)]
pub struct MotionTrace {
    pub values: RealSeries,
    pub gaps: Vec<(f64, f64)>,
    pub provenance: TraceProvenance,
}

impl MotionTrace {
    /// Contiguous gap-free index spans, in order.
    pub fn spans(&self) -> Vec<(usize, usize)> {
        let rate = self.values.sample_rate_hz;
        let n = self.values.len();
        let mut cut = vec![false; n];
        for &(a, b) in &self.gaps {
            let lo = ((a * rate).round() as usize).min(n);
            let hi = ((b * rate).round() as usize).min(n);
            for c in cut.iter_mut().take(hi).skip(lo) {
                *c = true;
            }
        }
        let mut spans = Vec::new();
        let mut start = None;
        for (i, &blocked) in cut.iter().enumerate() {
            match (blocked, start) {
                (false, None) => start = Some(i),
                (true, Some(s)) => {
                    spans.push((s, i));
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            spans.push((s, n));
        }
        spans
    }
}

/// Sum the modes whose center frequencies fall inside `keep_band`. An empty
/// selection yields an empty trace flagged as "no articulation detected".
pub fn reconstruct_lip_trace(v: &VmdResult, keep_band: Band) -> MotionTrace {
    let kept: Vec<usize> = v
        .center_freqs_hz
        .iter()
        .enumerate()
        .filter(|(_, &f)| keep_band.contains(f))
        .map(|(i, _)| i)
        .collect();
    let provenance = TraceProvenance {
        vmd_modes_kept: kept.clone(),
        vmd_center_freqs_hz: v.center_freqs_hz.clone(),
        no_articulation: kept.is_empty(),
        ..Default::default()
    };
    if kept.is_empty() {
        return MotionTrace {
            values: RealSeries::new(Vec::new(), v.sample_rate_hz),
            gaps: Vec::new(),
            provenance,
        };
    }
    let n = v.modes[0].len();
    let mut values = vec![0.0; n];
    for &k in &kept {
        for (acc, m) in values.iter_mut().zip(&v.modes[k]) {
            *acc += m;
        }
    }
    MotionTrace {
        values: RealSeries::new(values, v.sample_rate_hz),
        gaps: Vec::new(),
        provenance,
    }
}

/// Full isolation chain configuration. Defaults follow the shipped
/// pipeline: 2 kHz sideband, 1 kHz trace rate, 0-50 Hz motion band,
/// 0.5 s gate windows with alpha = 3, and K = 4 VMD modes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IsolationParams {
    pub delta_f1_hz: f64,
    pub bandwidth_hz: f64,
    pub trace_rate_hz: f64,
    /// Moving-average length for the light smoothing step.
    pub smooth_len: usize,
    pub lowpass_high_hz: f64,
    pub lowpass_taps: usize,
    pub gate_window_s: f64,
    pub gate_alpha: f64,
    pub vmd_modes: usize,
    pub vmd_penalty: f64,
    pub vmd_tol: f64,
    pub vmd_max_iter: usize,
    pub keep_low_hz: f64,
    pub keep_high_hz: f64,
}

impl Default for IsolationParams {
    fn default() -> Self {
        Self {
            delta_f1_hz: 2000.0,
            bandwidth_hz: 400.0,
            trace_rate_hz: 1000.0,
            smooth_len: 5,
            lowpass_high_hz: 50.0,
            lowpass_taps: 255,
            gate_window_s: 0.5,
            gate_alpha: 3.0,
            vmd_modes: 4,
            vmd_penalty: 2000.0,
            vmd_tol: 1e-6,
            vmd_max_iter: 500,
            keep_low_hz: 1.0,
            keep_high_hz: 50.0,
        }
    }
}

/// Centered moving average with edge clamping.
fn smooth(x: &RealSeries, len: usize) -> RealSeries {
    if len <= 1 {
        return x.clone();
    }
    let half = len / 2;
    let n = x.values.len();
    let values = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            x.values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    RealSeries::new(values, x.sample_rate_hz)
}

/// Downconvert + low-pass evaluated only at decimated output positions;
/// sample-for-sample equal to `isolate_backscatter` followed by decimation.
fn isolate_decimated(
    r: &IqRecording,
    delta_f1_hz: f64,
    bandwidth_hz: f64,
    factor: usize,
) -> Result<IqRecording, IsolationError> {
    check_isolation_band(r.sample_rate_hz, delta_f1_hz, bandwidth_hz)?;
    let shifted = frequency_shift(r, delta_f1_hz)?;
    let taps = crate::signal::design_fir(
        Band::low_pass(bandwidth_hz / 2.0),
        DEFAULT_ISOLATION_TAPS,
        r.sample_rate_hz,
    )?;
    let half = taps.len() / 2;
    let n = shifted.len();
    let at = |i: isize| -> Complex64 {
        let idx = if i < 0 {
            (-i - 1) as usize
        } else if i as usize >= n {
            2 * n - 1 - i as usize
        } else {
            i as usize
        };
        shifted.samples[idx.min(n - 1)]
    };
    let samples: Vec<Complex64> = (0..n)
        .step_by(factor)
        .map(|i| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, &tap) in taps.iter().enumerate() {
                acc += at(i as isize + half as isize - k as isize) * tap;
            }
            acc
        })
        .collect();
    Ok(IqRecording {
        samples,
        sample_rate_hz: r.sample_rate_hz / factor as f64,
        t0_s: r.t0_s,
    })
}

/// Run the full isolation chain on a raw recording: sideband isolation,
/// decimation to the trace rate, phase differences, smoothing, the 0-50 Hz
/// low-pass, MAD gating, and per-span VMD with band selection.
pub fn extract_motion_trace(
    r: &IqRecording,
    p: &IsolationParams,
) -> Result<(MotionTrace, GateReport), IsolationError> {
    let factor_f = r.sample_rate_hz / p.trace_rate_hz;
    if (factor_f - factor_f.round()).abs() > 1e-9 || factor_f < 1.0 {
        return Err(IsolationError::InvalidParam(format!(
            "sample rate {} not an integer multiple of trace rate {}",
            r.sample_rate_hz, p.trace_rate_hz
        )));
    }
    let factor = factor_f.round() as usize;
    if p.lowpass_high_hz >= p.trace_rate_hz / 2.0 {
        return Err(IsolationError::InvalidParam(
            "lowpass corner must be below the trace Nyquist".into(),
        ));
    }

    let isolated = isolate_decimated(r, p.delta_f1_hz, p.bandwidth_hz, factor)?;
    let dphi = phase_difference(&isolated)?;
    let smoothed = smooth(&dphi.series, p.smooth_len);
    let filtered = fir_filter(&smoothed, Band::low_pass(p.lowpass_high_hz), p.lowpass_taps)?;
    let gate = mad_gate(&filtered, p.gate_window_s, p.gate_alpha)?;

    let rate = filtered.sample_rate_hz;
    let win = (p.gate_window_s * rate).round().max(1.0) as usize;
    let n = filtered.values.len();
    let gaps: Vec<(f64, f64)> = gate
        .discarded
        .iter()
        .map(|&w| ((w * win) as f64 / rate, (((w + 1) * win).min(n)) as f64 / rate))
        .collect();

    let keep_band = Band { low_hz: p.keep_low_hz, high_hz: p.keep_high_hz };
    let mut values = vec![0.0; n];
    let mut provenance = TraceProvenance {
        delta_f1_hz: Some(p.delta_f1_hz),
        filter_band: Some(Band::low_pass(p.lowpass_high_hz)),
        zero_magnitude_samples: dphi.zero_magnitude_count,
        no_articulation: true,
        ..Default::default()
    };

    // VMD runs independently on each gap-free span.
    let skeleton = MotionTrace {
        values: RealSeries::new(values.clone(), rate),
        gaps: gaps.clone(),
        provenance: TraceProvenance::default(),
    };
    for (lo, hi) in skeleton.spans() {
        let span = &filtered.values[lo..hi];
        if span.len() < 64 {
            // Too short to decompose; pass the filtered values through.
            values[lo..hi].copy_from_slice(span);
            continue;
        }
        let v = vmd(
            &RealSeries::new(span.to_vec(), rate),
            p.vmd_modes,
            p.vmd_penalty,
            p.vmd_tol,
            p.vmd_max_iter,
        )?;
        let trace = reconstruct_lip_trace(&v, keep_band);
        provenance.vmd_center_freqs_hz = v.center_freqs_hz.clone();
        if !trace.provenance.no_articulation {
            provenance.no_articulation = false;
            provenance.vmd_modes_kept = trace.provenance.vmd_modes_kept.clone();
            values[lo..hi].copy_from_slice(&trace.values.values);
        }
    }

    Ok((
        MotionTrace { values: RealSeries::new(values, rate), gaps, provenance },
        gate,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{
        synthesize_scene, DopplerProfile, Interferer, KinematicMotif, OpeningProfile,
        SceneConfig, UtteranceScript,
    };
    use approx::assert_relative_eq;

    fn tone_iq(f0: f64, fs: f64, n: usize) -> IqRecording {
        IqRecording::new(
            (0..n)
                .map(|k| {
                    let p = 2.0 * std::f64::consts::PI * f0 * k as f64 / fs;
                    Complex64::new(p.cos(), p.sin())
                })
                .collect(),
            fs,
        )
    }

    fn rms_iq(s: &[Complex64]) -> f64 {
        (s.iter().map(|v| v.norm_sqr()).sum::<f64>() / s.len() as f64).sqrt()
    }

    fn spin_motif(rot_hz: f64, doppler_peak_hz: f64, duration_s: f64) -> KinematicMotif {
        let omega = 2.0 * std::f64::consts::PI * rot_hz;
        let radius = doppler_peak_hz / (16.0 * omega);
        KinematicMotif {
            frame_offset: [0.5, 0.0, 0.0],
            velocity: [0.0; 3],
            omega: [0.0, 0.0, omega],
            scatter_local: [radius, 0.0, 0.0],
            duration_s,
            opening: OpeningProfile { base: 1.0, depth: 0.5 },
        }
    }

    #[test]
    fn phase_difference_of_complex_exponential() {
        let fs = 1000.0;
        let f0 = 35.0;
        let s = tone_iq(f0, fs, 256);
        let pd = phase_difference(&s).unwrap();
        assert_eq!(pd.series.len(), 255);
        let expected = 2.0 * std::f64::consts::PI * f0 / fs;
        for v in &pd.series.values {
            assert_relative_eq!(*v, expected, epsilon = 1e-12);
        }
        assert_eq!(pd.zero_magnitude_count, 0);
    }

    #[test]
    fn phase_difference_constant_and_offset_invariance() {
        let s = IqRecording::new(vec![Complex64::new(0.3, -0.7); 50], 100.0);
        let pd = phase_difference(&s).unwrap();
        assert!(pd.series.values.iter().all(|&v| v == 0.0));

        let fs = 500.0;
        let base = tone_iq(11.0, fs, 128);
        let offset = Complex64::from_polar(2.5, 1.234);
        let rotated = IqRecording::new(
            base.samples.iter().map(|s| s * offset).collect(),
            fs,
        );
        let a = phase_difference(&base).unwrap();
        let b = phase_difference(&rotated).unwrap();
        for (x, y) in a.series.values.iter().zip(&b.series.values) {
            assert_relative_eq!(*x, *y, epsilon = 1e-12);
        }
    }

    #[test]
    fn phase_difference_zero_magnitude_counted() {
        let mut samples = vec![Complex64::new(1.0, 0.0); 10];
        samples[4] = Complex64::new(0.0, 0.0);
        let pd = phase_difference(&IqRecording::new(samples, 100.0)).unwrap();
        // Products at offsets 3->4 and 4->5 both vanish.
        assert_eq!(pd.zero_magnitude_count, 2);
        assert_eq!(pd.series.values[3], 0.0);
        assert_eq!(pd.series.values[4], 0.0);
    }

    #[test]
    fn mad_gate_constant_g_keeps_all() {
        // Constant |dphi| per window: MAD = 0, threshold = median, no window
        // strictly exceeds it.
        let dphi = RealSeries::new(vec![0.5; 1000], 100.0);
        let report = mad_gate(&dphi, 1.0, 3.0).unwrap();
        assert!(!report.disabled);
        assert_eq!(report.discarded.len(), 0);
        assert_eq!(report.kept.len(), 10);
    }

    #[test]
    fn mad_gate_discards_exactly_the_burst() {
        // Windows with exact RMS values laid out deterministically; one
        // window is pushed to median + 10 * MAD.
        let win = 100usize;
        let spread = [-1.0, 0.6, -0.2, 1.0, -0.6, 0.2, 0.8, -0.8, 0.4, -0.4, 0.0];
        let mut rms: Vec<f64> = spread.iter().map(|u| 1.0 + 0.05 * u).collect();
        let med = median(&rms);
        let mad = median_abs_deviation(&rms);
        rms.push(med + 10.0 * mad);
        let burst_idx = rms.len() - 1;
        let mut values = Vec::new();
        for r in &rms {
            values.extend(std::iter::repeat_n(*r, win));
        }
        let report = mad_gate(&RealSeries::new(values, 100.0), 1.0, 3.0).unwrap();
        assert_eq!(report.discarded, vec![burst_idx]);
        assert_eq!(report.kept.len(), rms.len() - 1);
    }

    #[test]
    fn mad_gate_huge_alpha_keeps_all() {
        let values: Vec<f64> = (0..800).map(|i| ((i * 37 % 13) as f64 - 6.0) * 0.1).collect();
        let report = mad_gate(&RealSeries::new(values, 100.0), 1.0, 1e12).unwrap();
        assert!(report.discarded.is_empty());
    }

    #[test]
    fn mad_gate_few_windows_disabled() {
        let dphi = RealSeries::new(vec![0.1; 150], 100.0);
        let report = mad_gate(&dphi, 1.0, 3.0).unwrap();
        assert!(report.disabled);
        assert_eq!(report.kept, vec![0, 1]);
    }

    #[test]
    fn mad_gate_idempotent_on_kept() {
        // Gaussian-ish g over many windows: regating the kept windows
        // discards nothing new.
        let mut state = 0x12345678u64;
        let mut next = || {
            state = crate::sim::splitmix64(state);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let win = 50;
        let mut values = Vec::new();
        for _ in 0..40 {
            let level = 1.0 + 0.3 * (next() + next() + next() - 1.5);
            values.extend(std::iter::repeat_n(level.abs(), win));
        }
        let series = RealSeries::new(values, 100.0);
        let first = mad_gate(&series, 0.5, 3.0).unwrap();
        let kept_values: Vec<f64> = first
            .kept
            .iter()
            .flat_map(|&w| series.values[w * win..(w + 1) * win].to_vec())
            .collect();
        let second = mad_gate(&RealSeries::new(kept_values, 100.0), 0.5, 3.0).unwrap();
        assert!(second.discarded.is_empty(), "regate discarded {:?}", second.discarded);
    }

    fn l2(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn vmd_two_tone_recovery() {
        let fs = 1000.0;
        let n = 2000;
        let x = RealSeries::new(
            (0..n)
                .map(|k| {
                    let t = k as f64 / fs;
                    (2.0 * std::f64::consts::PI * 2.0 * t).sin()
                        + (2.0 * std::f64::consts::PI * 40.0 * t).sin()
                })
                .collect(),
            fs,
        );
        let v = vmd(&x, 2, 2000.0, 1e-6, 500).unwrap();
        assert!((v.center_freqs_hz[0] - 2.0).abs() < 0.5, "got {:?}", v.center_freqs_hz);
        assert!((v.center_freqs_hz[1] - 40.0).abs() < 0.5, "got {:?}", v.center_freqs_hz);

        // Each mode correlates with its own tone.
        let tone = |f0: f64| -> Vec<f64> {
            (0..n)
                .map(|k| (2.0 * std::f64::consts::PI * f0 * k as f64 / fs).sin())
                .collect()
        };
        for (mode, f0) in v.modes.iter().zip([2.0, 40.0]) {
            let t = tone(f0);
            let corr = pearson(mode, &t);
            assert!(corr > 0.95, "mode at {f0} Hz correlation {corr}");
        }
    }

    #[test]
    fn vmd_single_tone_reconstruction() {
        let fs = 1000.0;
        let n = 4000;
        let x = RealSeries::new(
            (0..n)
                .map(|k| (2.0 * std::f64::consts::PI * 25.0 * k as f64 / fs).sin())
                .collect(),
            fs,
        );
        let v = vmd(&x, 1, 2000.0, 1e-6, 500).unwrap();
        let err: Vec<f64> = x.values.iter().zip(&v.modes[0]).map(|(a, b)| a - b).collect();
        let rel = l2(&err) / l2(&x.values);
        assert!(rel < 0.05, "relative error {rel}");
    }

    #[test]
    fn vmd_zero_input_converges() {
        let x = RealSeries::new(vec![0.0; 256], 100.0);
        let v = vmd(&x, 3, 2000.0, 1e-6, 100).unwrap();
        assert!(v.converged);
        for mode in &v.modes {
            assert!(mode.iter().all(|&m| m == 0.0));
        }
    }

    #[test]
    fn vmd_mode_sum_conservation() {
        let fs = 200.0;
        let x = RealSeries::new(
            (0..512)
                .map(|k| {
                    let t = k as f64 / fs;
                    (2.0 * std::f64::consts::PI * 3.0 * t).sin()
                        + 0.5 * (2.0 * std::f64::consts::PI * 17.0 * t).cos()
                        + 0.1 * ((k as u64 * 2654435761 % 97) as f64 / 97.0 - 0.5)
                })
                .collect(),
            fs,
        );
        let v = vmd(&x, 3, 1000.0, 1e-7, 300).unwrap();
        for i in 0..x.values.len() {
            let total: f64 = v.modes.iter().map(|m| m[i]).sum::<f64>() + v.residual[i];
            assert_relative_eq!(total, x.values[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn vmd_rejects_bad_input() {
        let x = RealSeries::new(vec![1.0, f64::NAN, 0.0, 0.0], 10.0);
        assert!(matches!(vmd(&x, 1, 100.0, 1e-6, 10), Err(IsolationError::NonFinite(1))));
        let y = RealSeries::new(vec![1.0; 16], 10.0);
        assert!(vmd(&y, 0, 100.0, 1e-6, 10).is_err());
        assert!(vmd(&y, 1, -1.0, 1e-6, 10).is_err());
    }

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len().min(b.len()) as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let mut num = 0.0;
        let mut da = 0.0;
        let mut db = 0.0;
        for (x, y) in a.iter().zip(b) {
            num += (x - ma) * (y - mb);
            da += (x - ma) * (x - ma);
            db += (y - mb) * (y - mb);
        }
        num / (da.sqrt() * db.sqrt()).max(1e-300)
    }

    #[test]
    fn reconstruct_keeps_band_modes() {
        let fs = 1000.0;
        let n = 2000;
        let x = RealSeries::new(
            (0..n)
                .map(|k| {
                    let t = k as f64 / fs;
                    (2.0 * std::f64::consts::PI * 2.0 * t).sin()
                        + (2.0 * std::f64::consts::PI * 40.0 * t).sin()
                })
                .collect(),
            fs,
        );
        let v = vmd(&x, 2, 2000.0, 1e-6, 500).unwrap();

        let low_only = reconstruct_lip_trace(&v, Band { low_hz: 1.0, high_hz: 10.0 });
        let two_hz: Vec<f64> = (0..n)
            .map(|k| (2.0 * std::f64::consts::PI * 2.0 * k as f64 / fs).sin())
            .collect();
        assert!(pearson(&low_only.values.values, &two_hz) > 0.95);

        let all = reconstruct_lip_trace(&v, Band { low_hz: 0.0, high_hz: 500.0 });
        let err: Vec<f64> =
            x.values.iter().zip(&all.values.values).map(|(a, b)| a - b).collect();
        assert!(l2(&err) / l2(&x.values) < 0.2);

        let none = reconstruct_lip_trace(&v, Band { low_hz: 45.0, high_hz: 50.0 });
        assert!(none.provenance.no_articulation);
        assert!(none.values.is_empty());
    }

    #[test]
    fn isolation_band_checks() {
        let r = tone_iq(0.0, 20_000.0, 1024);
        assert!(isolate_backscatter(&r, 2000.0, 4000.0).is_err()); // DC leak
        assert!(isolate_backscatter(&r, 9900.0, 400.0).is_err()); // beyond Nyquist
    }

    fn static_scene(tag_gain: f64, snr_db: f64, seed: u64) -> IqRecording {
        let mut cfg = SceneConfig::default();
        cfg.tag_gain_re = tag_gain;
        cfg.snr_db = snr_db;
        let script = UtteranceScript { tokens: vec![], motifs: vec![], inter_unit_gap_s: 1.0 };
        synthesize_scene(&script, &cfg, seed).unwrap().0
    }

    #[test]
    fn isolated_static_tag_magnitude_nearly_constant() {
        let iq = static_scene(0.5, 20.0, 5);
        let isolated = isolate_backscatter(&iq, 2000.0, 400.0).unwrap();
        let trim = 300;
        let mags: Vec<f64> =
            isolated.samples[trim..isolated.len() - trim].iter().map(|s| s.norm()).collect();
        let mean = mags.iter().sum::<f64>() / mags.len() as f64;
        let var = mags.iter().map(|m| (m - mean) * (m - mean)).sum::<f64>() / mags.len() as f64;
        let cv = var.sqrt() / mean;
        assert!(cv < 0.05, "coefficient of variation {cv}");
    }

    #[test]
    fn tag_absent_isolated_power_is_tiny() {
        let present = static_scene(0.5, 20.0, 5);
        let absent = static_scene(0.0, 20.0, 5);
        let p_present = rms_iq(&isolate_backscatter(&present, 2000.0, 400.0).unwrap().samples);
        let p_absent = rms_iq(&isolate_backscatter(&absent, 2000.0, 400.0).unwrap().samples);
        let ratio = (p_absent * p_absent) / (p_present * p_present);
        assert!(ratio <= 0.01, "tag-absent power ratio {ratio}");
    }

    #[test]
    fn direct_path_leakage_below_30_db() {
        let iq = static_scene(0.0, f64::INFINITY, 1);
        let isolated = isolate_backscatter(&iq, 2000.0, 400.0).unwrap();
        let p_in = rms_iq(&iq.samples).powi(2);
        let p_out = rms_iq(&isolated.samples).powi(2);
        assert!(p_out < 1e-3 * p_in, "leakage {} dB", 10.0 * (p_out / p_in).log10());
    }

    fn motion_scene(
        cfg: &SceneConfig,
        motifs: Vec<KinematicMotif>,
        gap_s: f64,
        seed: u64,
    ) -> (IqRecording, crate::sim::SceneAnnotation) {
        let script = UtteranceScript {
            tokens: (0..motifs.len() as u32).collect(),
            motifs,
            inter_unit_gap_s: gap_s,
        };
        synthesize_scene(&script, cfg, seed).unwrap()
    }

    #[test]
    fn extracted_trace_tracks_ground_truth_doppler() {
        let cfg = SceneConfig::default();
        // Articulation covers most gate windows, as in real utterances.
        let (iq, ann) = motion_scene(
            &cfg,
            vec![spin_motif(12.0, 20.0, 0.6), spin_motif(30.0, 25.0, 0.6)],
            0.15,
            7,
        );
        let (trace, _) = extract_motion_trace(&iq, &IsolationParams::default()).unwrap();
        let truth = ann.doppler_series();
        // The phase-difference trace is proportional to instantaneous
        // Doppler; correlation against the known f_D(t) must be strong.
        let n = trace.values.len().min(truth.len());
        let corr = pearson(&trace.values.values[..n], &truth.values[..n]);
        assert!(corr > 0.9, "correlation with ground truth {corr}");
    }

    #[test]
    fn gating_improves_corrupted_scene_correlation() {
        let mut wins = 0;
        for seed in 0..20 {
            let mut cfg = SceneConfig::default();
            cfg.snr_db = 25.0;
            cfg.interferers = vec![Interferer {
                gain_re: 2.0,
                gain_im: 0.0,
                doppler: DopplerProfile::Burst {
                    start_s: 1.05,
                    duration_s: 0.4,
                    rate_hz: 9.0,
                    amp_hz: 160.0,
                },
                modulated: true,
            }];
            let (iq, ann) = motion_scene(
                &cfg,
                vec![
                    spin_motif(12.0, 20.0, 0.7),
                    spin_motif(24.0, 22.0, 0.7),
                    spin_motif(18.0, 18.0, 0.7),
                ],
                0.1,
                seed,
            );
            let params = IsolationParams::default();
            let (gated, report) = extract_motion_trace(&iq, &params).unwrap();
            let mut ungated_params = params.clone();
            ungated_params.gate_alpha = 1e12; // effectively disables the gate
            let (ungated, _) = extract_motion_trace(&iq, &ungated_params).unwrap();
            assert!(!report.discarded.is_empty(), "seed {seed}: burst not gated");

            let truth = ann.doppler_series();
            let n = ungated.values.len().min(truth.len());
            // Gated correlation over kept samples only; ungated over all.
            let mut kept_trace = Vec::new();
            let mut kept_truth = Vec::new();
            for (lo, hi) in gated.spans() {
                kept_trace.extend_from_slice(&gated.values.values[lo..hi.min(n)]);
                kept_truth.extend_from_slice(&truth.values[lo..hi.min(n)]);
            }
            let c_gated = pearson(&kept_trace, &kept_truth);
            let c_ungated = pearson(&ungated.values.values[..n], &truth.values[..n]);
            if c_gated > c_ungated {
                wins += 1;
            }
        }
        assert_eq!(wins, 20, "gating must strictly help in every seed, got {wins}/20");
    }

    #[test]
    fn doppler_spread_monotone_in_speed() {
        // Faster articulation spreads the isolated tag spectrum.
        let cfg = SceneConfig::default();
        let mut widths = Vec::new();
        for &rot in &[6.0, 12.0, 18.0, 24.0, 30.0] {
            let motif = spin_motif(rot, 0.8 * rot, 0.5);
            let (iq, _) = motion_scene(&cfg, vec![motif], 0.3, 3);
            let isolated = isolate_backscatter(&iq, 2000.0, 400.0).unwrap();
            // RMS bandwidth of the full isolated recording.
            let mut planner = FftPlanner::new();
            let n = isolated.len();
            let fft = planner.plan_fft_forward(n);
            let mut buf: Vec<Complex<f64>> =
                isolated.samples.iter().map(|s| Complex::new(s.re, s.im)).collect();
            fft.process(&mut buf);
            let fs = isolated.sample_rate_hz;
            let mut p_total = 0.0;
            let mut mean_f = 0.0;
            let freqs: Vec<f64> = (0..n)
                .map(|i| {
                    let f = i as f64 * fs / n as f64;
                    if f > fs / 2.0 {
                        f - fs
                    } else {
                        f
                    }
                })
                .collect();
            for (i, c) in buf.iter().enumerate() {
                let p = c.norm_sqr();
                p_total += p;
                mean_f += freqs[i] * p;
            }
            mean_f /= p_total;
            let mut var = 0.0;
            for (i, c) in buf.iter().enumerate() {
                var += (freqs[i] - mean_f).powi(2) * c.norm_sqr();
            }
            widths.push((var / p_total).sqrt());
        }
        for pair in widths.windows(2) {
            assert!(pair[1] > pair[0], "widths not monotone: {widths:?}");
        }
    }
}
