//! Complex baseband containers and shared DSP primitives.
//!
//! Everything downstream (scene synthesis, isolation, segmentation, the
//! decoding frontend) is built on the four operations here: short-time
//! energy, STFT, FIR filtering, and frequency shifting. All operations are
//! pure functions over immutable inputs.

use num_complex::Complex64;
use rustfft::{num_complex::Complex, FftPlanner};

/// Complex baseband sample type used throughout the crate.
pub type IqSample = Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("input too short: need at least {need} samples, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

/// Complex baseband sample stream with rate metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct IqRecording {
    pub samples: Vec<Complex64>,
    pub sample_rate_hz: f64,
    pub t0_s: f64,
}

impl IqRecording {
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64) -> Self {
        assert!(sample_rate_hz > 0.0, "sample rate must be positive");
        Self { samples, sample_rate_hz, t0_s: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    pub fn total_energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }
}

/// Real-valued series with the same length/rate bookkeeping as [`IqRecording`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealSeries {
    pub values: Vec<f64>,
    pub sample_rate_hz: f64,
}

impl RealSeries {
    pub fn new(values: Vec<f64>, sample_rate_hz: f64) -> Self {
        assert!(sample_rate_hz > 0.0, "sample rate must be positive");
        Self { values, sample_rate_hz }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.values.len() as f64 / self.sample_rate_hz
    }

    /// Linear-interpolation resample to `target_hz`, preserving duration.
    pub fn resample_linear(&self, target_hz: f64) -> Result<RealSeries, SignalError> {
        if target_hz <= 0.0 {
            return Err(SignalError::InvalidParam("target rate must be positive".into()));
        }
        if self.values.len() < 2 {
            return Ok(RealSeries::new(self.values.clone(), target_hz));
        }
        let n_out = (self.values.len() as f64 * target_hz / self.sample_rate_hz).round() as usize;
        let n_out = n_out.max(1);
        let step = self.sample_rate_hz / target_hz;
        let mut out = Vec::with_capacity(n_out);
        for i in 0..n_out {
            let pos = i as f64 * step;
            let i0 = (pos.floor() as usize).min(self.values.len() - 1);
            let i1 = (i0 + 1).min(self.values.len() - 1);
            let frac = pos - i0 as f64;
            out.push(self.values[i0] * (1.0 - frac) + self.values[i1] * frac);
        }
        Ok(RealSeries::new(out, target_hz))
    }
}

/// Window taper for STFT frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WindowFn {
    Hann,
    Hamming,
    Rectangular,
}

impl WindowFn {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            WindowFn::Rectangular => vec![1.0; len],
            WindowFn::Hann => raised_cosine(len, 0.5, 0.5),
            WindowFn::Hamming => raised_cosine(len, 0.54, 0.46),
        }
    }
}

fn raised_cosine(len: usize, a: f64, b: f64) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let denom = (len - 1) as f64;
    (0..len)
        .map(|n| a - b * (2.0 * std::f64::consts::PI * n as f64 / denom).cos())
        .collect()
}

/// Time-frequency power matrix (T frames by F bins, all entries >= 0).
#[derive(Debug, Clone)]
pub struct Spectrogram {
    /// Row-major T x F power values.
    pub frames: Vec<f64>,
    pub t_len: usize,
    pub f_len: usize,
    pub frame_rate_hz: f64,
    pub freq_resolution_hz: f64,
    pub window_len: usize,
    pub hop: usize,
}

impl Spectrogram {
    pub fn frame(&self, t: usize) -> &[f64] {
        &self.frames[t * self.f_len..(t + 1) * self.f_len]
    }
}

/// Number of full analysis frames for an input of `n` samples.
pub fn frame_count(n: usize, window_len: usize, hop: usize) -> usize {
    if n < window_len {
        0
    } else {
        (n - window_len) / hop + 1
    }
}

fn short_time_energy_sq(sq: &[f64], window: usize) -> Result<Vec<f64>, SignalError> {
    if window < 1 {
        return Err(SignalError::InvalidParam("window length must be >= 1".into()));
    }
    if sq.len() < window {
        return Err(SignalError::TooShort { need: window, got: sq.len() });
    }
    let mut prefix = Vec::with_capacity(sq.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &v in sq {
        acc += v;
        prefix.push(acc);
    }
    Ok((0..sq.len() - window + 1)
        .map(|t| (prefix[t + window] - prefix[t]).max(0.0))
        .collect())
}

/// Sliding-window energy of a real series: `out[t] = sum_{k=t}^{t+W-1} x[k]^2`.
pub fn short_time_energy(x: &RealSeries, window: usize) -> Result<RealSeries, SignalError> {
    let sq: Vec<f64> = x.values.iter().map(|v| v * v).collect();
    Ok(RealSeries::new(short_time_energy_sq(&sq, window)?, x.sample_rate_hz))
}

/// Sliding-window energy of a complex recording: `out[t] = sum |x[k]|^2`.
pub fn short_time_energy_iq(x: &IqRecording, window: usize) -> Result<RealSeries, SignalError> {
    let sq: Vec<f64> = x.samples.iter().map(|s| s.norm_sqr()).collect();
    Ok(RealSeries::new(short_time_energy_sq(&sq, window)?, x.sample_rate_hz))
}

/// STFT power spectrogram of a real series (one-sided, F = window_len/2 + 1).
///
/// Per-frame power is the squared magnitude of the windowed DFT; no
/// normalization is applied. Input shorter than one window is rejected.
pub fn stft(
    x: &RealSeries,
    window_len: usize,
    hop: usize,
    window_fn: WindowFn,
) -> Result<Spectrogram, SignalError> {
    if window_len < 2 {
        return Err(SignalError::InvalidParam("window_len must be >= 2".into()));
    }
    if hop < 1 {
        return Err(SignalError::InvalidParam("hop must be >= 1".into()));
    }
    if x.values.len() < window_len {
        return Err(SignalError::TooShort { need: window_len, got: x.values.len() });
    }
    let taper = window_fn.coefficients(window_len);
    let t_len = frame_count(x.values.len(), window_len, hop);
    let f_len = window_len / 2 + 1;
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(window_len);
    let mut frames = Vec::with_capacity(t_len * f_len);
    let mut buf = vec![Complex::new(0.0, 0.0); window_len];
    for t in 0..t_len {
        let start = t * hop;
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = Complex::new(x.values[start + i] * taper[i], 0.0);
        }
        fft.process(&mut buf);
        frames.extend(buf[..f_len].iter().map(|c| c.norm_sqr()));
    }
    Ok(Spectrogram {
        frames,
        t_len,
        f_len,
        frame_rate_hz: x.sample_rate_hz / hop as f64,
        freq_resolution_hz: x.sample_rate_hz / window_len as f64,
        window_len,
        hop,
    })
}

/// STFT power spectrogram of a complex recording (two-sided, F = window_len,
/// bins in FFT order: nonnegative frequencies first).
pub fn stft_iq(
    x: &IqRecording,
    window_len: usize,
    hop: usize,
    window_fn: WindowFn,
) -> Result<Spectrogram, SignalError> {
    if window_len < 2 {
        return Err(SignalError::InvalidParam("window_len must be >= 2".into()));
    }
    if hop < 1 {
        return Err(SignalError::InvalidParam("hop must be >= 1".into()));
    }
    if x.samples.len() < window_len {
        return Err(SignalError::TooShort { need: window_len, got: x.samples.len() });
    }
    let taper = window_fn.coefficients(window_len);
    let t_len = frame_count(x.samples.len(), window_len, hop);
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(window_len);
    let mut frames = Vec::with_capacity(t_len * window_len);
    let mut buf = vec![Complex::new(0.0, 0.0); window_len];
    for t in 0..t_len {
        let start = t * hop;
        for (i, slot) in buf.iter_mut().enumerate() {
            let s = x.samples[start + i];
            *slot = Complex::new(s.re * taper[i], s.im * taper[i]);
        }
        fft.process(&mut buf);
        frames.extend(buf.iter().map(|c| c.norm_sqr()));
    }
    Ok(Spectrogram {
        frames,
        t_len,
        f_len: window_len,
        frame_rate_hz: x.sample_rate_hz / hop as f64,
        freq_resolution_hz: x.sample_rate_hz / window_len as f64,
        window_len,
        hop,
    })
}

/// Passband of a linear-phase FIR filter. `low_hz == 0` selects a low-pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub low_hz: f64,
    pub high_hz: f64,
}

impl Band {
    pub fn low_pass(high_hz: f64) -> Self {
        Self { low_hz: 0.0, high_hz }
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.low_hz && f <= self.high_hz
    }
}

/// Windowed-sinc taps for an ideal low-pass at `cutoff_hz` (Hamming taper),
/// normalized to unit DC gain.
fn lowpass_taps(cutoff_hz: f64, taps: usize, fs: f64) -> Vec<f64> {
    let m = (taps - 1) as f64 / 2.0;
    let fc = cutoff_hz / fs;
    let hamming = WindowFn::Hamming.coefficients(taps);
    let mut h: Vec<f64> = (0..taps)
        .map(|n| {
            let x = n as f64 - m;
            let ideal = if x == 0.0 {
                2.0 * fc
            } else {
                (2.0 * std::f64::consts::PI * fc * x).sin() / (std::f64::consts::PI * x)
            };
            ideal * hamming[n]
        })
        .collect();
    let sum: f64 = h.iter().sum();
    for v in &mut h {
        *v /= sum;
    }
    h
}

/// FIR taps for `band` at sample rate `fs`. Band-pass taps are normalized to
/// unit gain at the band center.
pub fn design_fir(band: Band, taps: usize, fs: f64) -> Result<Vec<f64>, SignalError> {
    if taps % 2 == 0 || taps < 3 {
        return Err(SignalError::InvalidParam(format!("taps must be odd and >= 3, got {taps}")));
    }
    let nyquist = fs / 2.0;
    if !(0.0 <= band.low_hz && band.low_hz < band.high_hz && band.high_hz <= nyquist) {
        return Err(SignalError::InvalidParam(format!(
            "band [{}, {}] Hz outside 0..{} Hz",
            band.low_hz, band.high_hz, nyquist
        )));
    }
    if band.low_hz == 0.0 {
        return Ok(lowpass_taps(band.high_hz, taps, fs));
    }
    let hi = lowpass_taps(band.high_hz, taps, fs);
    let lo = lowpass_taps(band.low_hz, taps, fs);
    let mut h: Vec<f64> = hi.iter().zip(&lo).map(|(a, b)| a - b).collect();
    // Normalize to unit magnitude response at the band center.
    let fc = 0.5 * (band.low_hz + band.high_hz);
    let m = (taps - 1) as f64 / 2.0;
    let (mut re, mut im) = (0.0, 0.0);
    for (n, &tap) in h.iter().enumerate() {
        let phase = -2.0 * std::f64::consts::PI * fc * (n as f64 - m) / fs;
        re += tap * phase.cos();
        im += tap * phase.sin();
    }
    let gain = (re * re + im * im).sqrt();
    if gain > 0.0 {
        for v in &mut h {
            *v /= gain;
        }
    }
    Ok(h)
}

/// Linear-phase "same"-length convolution with symmetric edge padding, so the
/// output stays aligned with the input timestamps.
fn convolve_same(x: &[f64], taps: &[f64]) -> Vec<f64> {
    let half = taps.len() / 2;
    let n = x.len();
    let at = |i: isize| -> f64 {
        // Mirror-reflect indexes outside the signal.
        let idx = if i < 0 {
            (-i - 1) as usize
        } else if i as usize >= n {
            2 * n - 1 - i as usize
        } else {
            i as usize
        };
        x[idx.min(n - 1)]
    };
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for (k, &tap) in taps.iter().enumerate() {
                acc += tap * at(i as isize + half as isize - k as isize);
            }
            acc
        })
        .collect()
}

/// Band-limit a real series with a linear-phase FIR; output length equals
/// input length and stays time-aligned (group delay compensated).
pub fn fir_filter(x: &RealSeries, band: Band, taps: usize) -> Result<RealSeries, SignalError> {
    let h = design_fir(band, taps, x.sample_rate_hz)?;
    if x.values.is_empty() {
        return Err(SignalError::TooShort { need: 1, got: 0 });
    }
    Ok(RealSeries::new(convolve_same(&x.values, &h), x.sample_rate_hz))
}

/// Complex-input variant of [`fir_filter`] (real taps applied to I and Q).
pub fn fir_filter_iq(x: &IqRecording, band: Band, taps: usize) -> Result<IqRecording, SignalError> {
    let h = design_fir(band, taps, x.sample_rate_hz)?;
    if x.samples.is_empty() {
        return Err(SignalError::TooShort { need: 1, got: 0 });
    }
    let re: Vec<f64> = x.samples.iter().map(|s| s.re).collect();
    let im: Vec<f64> = x.samples.iter().map(|s| s.im).collect();
    let re_f = convolve_same(&re, &h);
    let im_f = convolve_same(&im, &h);
    let samples = re_f
        .into_iter()
        .zip(im_f)
        .map(|(r, i)| Complex64::new(r, i))
        .collect();
    Ok(IqRecording { samples, sample_rate_hz: x.sample_rate_hz, t0_s: x.t0_s })
}

/// Multiply by `exp(-j 2 pi shift_hz k / fs)`: content at `+shift_hz` moves
/// to DC. Unit-modulus multiplier, so energy is preserved.
pub fn frequency_shift(x: &IqRecording, shift_hz: f64) -> Result<IqRecording, SignalError> {
    if shift_hz.abs() >= x.sample_rate_hz / 2.0 {
        return Err(SignalError::InvalidParam(format!(
            "shift {} Hz outside Nyquist {} Hz",
            shift_hz,
            x.sample_rate_hz / 2.0
        )));
    }
    let step = shift_hz / x.sample_rate_hz;
    let samples = x
        .samples
        .iter()
        .enumerate()
        .map(|(k, s)| {
            // Reduce k*step mod 1 before the trig call to keep precision on
            // long recordings.
            let turns = (k as f64 * step).rem_euclid(1.0);
            let phase = -2.0 * std::f64::consts::PI * turns;
            s * Complex64::new(phase.cos(), phase.sin())
        })
        .collect();
    Ok(IqRecording { samples, sample_rate_hz: x.sample_rate_hz, t0_s: x.t0_s })
}

/// Decimate an IQ recording by an integer factor (no anti-alias filter; the
/// caller is expected to have band-limited the signal first).
pub fn decimate_iq(x: &IqRecording, factor: usize) -> Result<IqRecording, SignalError> {
    if factor == 0 {
        return Err(SignalError::InvalidParam("decimation factor must be >= 1".into()));
    }
    Ok(IqRecording {
        samples: x.samples.iter().step_by(factor).copied().collect(),
        sample_rate_hz: x.sample_rate_hz / factor as f64,
        t0_s: x.t0_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn tone(f0: f64, fs: f64, n: usize) -> RealSeries {
        RealSeries::new(
            (0..n)
                .map(|k| (2.0 * std::f64::consts::PI * f0 * k as f64 / fs).sin())
                .collect(),
            fs,
        )
    }

    fn complex_tone(f0: f64, fs: f64, n: usize) -> IqRecording {
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

    fn fft_argmax(x: &IqRecording) -> usize {
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(x.len());
        let mut buf: Vec<Complex<f64>> =
            x.samples.iter().map(|s| Complex::new(s.re, s.im)).collect();
        fft.process(&mut buf);
        buf.iter()
            .enumerate()
            .max_by(|a, b| a.1.norm_sqr().partial_cmp(&b.1.norm_sqr()).unwrap())
            .unwrap()
            .0
    }

    #[test]
    fn ste_constant_magnitude() {
        let x = IqRecording::new(vec![Complex64::new(0.6, 0.8); 64], 100.0);
        let e = short_time_energy_iq(&x, 10).unwrap();
        assert_eq!(e.len(), 55);
        for v in &e.values {
            assert_relative_eq!(*v, 10.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn ste_zero_input() {
        let x = RealSeries::new(vec![0.0; 40], 100.0);
        let e = short_time_energy(&x, 7).unwrap();
        assert!(e.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ste_hand_example() {
        let x = RealSeries::new(vec![1.0, 2.0, 3.0], 10.0);
        let e = short_time_energy(&x, 2).unwrap();
        assert_eq!(e.values, vec![5.0, 13.0]);
    }

    #[test]
    fn ste_rejects_short_input() {
        let x = RealSeries::new(vec![1.0, 2.0], 10.0);
        assert!(matches!(short_time_energy(&x, 3), Err(SignalError::TooShort { .. })));
    }

    #[test]
    fn stft_tone_peak_bin() {
        // 50 Hz tone, 256-sample rectangular window at 1600 Hz: integer
        // number of periods per window, so the peak lands exactly on a bin.
        let fs = 1600.0;
        let f0 = 50.0;
        let x = tone(f0, fs, 1024);
        let sg = stft(&x, 256, 64, WindowFn::Rectangular).unwrap();
        let expected_bin = (f0 * 256.0 / fs).round() as usize;
        for t in 0..sg.t_len {
            let frame = sg.frame(t);
            let arg = frame
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(arg, expected_bin);
        }
    }

    #[test]
    fn stft_zero_and_single_frame() {
        let x = RealSeries::new(vec![0.0; 300], 1000.0);
        let sg = stft(&x, 256, 10, WindowFn::Hann).unwrap();
        assert!(sg.frames.iter().all(|&v| v == 0.0));

        let x = RealSeries::new(vec![1.0; 256], 1000.0);
        let sg = stft(&x, 256, 999, WindowFn::Hann).unwrap();
        assert_eq!(sg.t_len, 1);
    }

    #[test]
    fn stft_rejects_short_input() {
        let x = RealSeries::new(vec![1.0; 100], 1000.0);
        assert!(stft(&x, 256, 10, WindowFn::Hann).is_err());
    }

    #[test]
    fn fir_dc_passes_low_pass() {
        let x = RealSeries::new(vec![1.0; 2000], 1000.0);
        let y = fir_filter(&x, Band::low_pass(50.0), 255).unwrap();
        assert_eq!(y.len(), x.len());
        let max_dev = y.values.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
        assert!(max_dev < 1e-3, "max deviation {max_dev}");
    }

    #[test]
    fn fir_stopband_attenuation() {
        let fs = 1000.0;
        let x = tone(200.0, fs, 4000);
        let y = fir_filter(&x, Band::low_pass(50.0), 255).unwrap();
        let rms = |v: &[f64]| (v.iter().map(|a| a * a).sum::<f64>() / v.len() as f64).sqrt();
        // Skip the transient at each edge.
        let y_rms = rms(&y.values[300..3700]);
        let x_rms = rms(&x.values[300..3700]);
        assert!(y_rms < 0.01 * x_rms, "stopband leak {}", y_rms / x_rms);
    }

    #[test]
    fn fir_zero_input() {
        let x = RealSeries::new(vec![0.0; 500], 1000.0);
        let y = fir_filter(&x, Band::low_pass(100.0), 63).unwrap();
        assert!(y.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fir_rejects_bad_band() {
        let x = RealSeries::new(vec![0.0; 500], 1000.0);
        assert!(fir_filter(&x, Band { low_hz: 0.0, high_hz: 600.0 }, 63).is_err());
        assert!(fir_filter(&x, Band { low_hz: 0.0, high_hz: 100.0 }, 64).is_err());
    }

    #[test]
    fn fir_linearity() {
        let fs = 1000.0;
        let x = tone(30.0, fs, 600);
        let y = tone(70.0, fs, 600);
        let (a, b) = (2.5, -1.25);
        let mixed = RealSeries::new(
            x.values.iter().zip(&y.values).map(|(p, q)| a * p + b * q).collect(),
            fs,
        );
        let band = Band::low_pass(50.0);
        let fm = fir_filter(&mixed, band, 101).unwrap();
        let fx = fir_filter(&x, band, 101).unwrap();
        let fy = fir_filter(&y, band, 101).unwrap();
        for i in 0..fm.len() {
            assert_relative_eq!(
                fm.values[i],
                a * fx.values[i] + b * fy.values[i],
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn shift_zero_is_identity() {
        let x = complex_tone(12.0, 100.0, 256);
        let y = frequency_shift(&x, 0.0).unwrap();
        for (a, b) in x.samples.iter().zip(&y.samples) {
            assert_relative_eq!(a.re, b.re, epsilon = 1e-12);
            assert_relative_eq!(a.im, b.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn shift_moves_tone_to_dc() {
        let fs = 1024.0;
        let f0 = 128.0;
        let x = complex_tone(f0, fs, 1024);
        let y = frequency_shift(&x, f0).unwrap();
        assert_eq!(fft_argmax(&y), 0);
    }

    #[test]
    fn shift_preserves_energy_and_inverts() {
        let x = complex_tone(37.5, 500.0, 2048);
        let y = frequency_shift(&x, 81.25).unwrap();
        assert_relative_eq!(x.total_energy(), y.total_energy(), max_relative = 1e-9);
        let z = frequency_shift(&y, -81.25).unwrap();
        for (a, b) in x.samples.iter().zip(&z.samples) {
            assert!((a - b).norm() < 1e-9 * a.norm().max(1.0));
        }
    }

    #[test]
    fn shift_rejects_beyond_nyquist() {
        let x = complex_tone(10.0, 100.0, 64);
        assert!(frequency_shift(&x, 60.0).is_err());
    }

    proptest! {
        #[test]
        fn frame_count_formula(n in 1usize..4000, window in 2usize..512, hop in 1usize..64) {
            prop_assume!(n >= window);
            let x = RealSeries::new(vec![0.5; n], 1000.0);
            let sg = stft(&x, window, hop, WindowFn::Hann).unwrap();
            prop_assert_eq!(sg.t_len, (n - window) / hop + 1);
            prop_assert_eq!(sg.frames.len(), sg.t_len * sg.f_len);
        }

        #[test]
        fn ste_shift_equivariance(delay in 1usize..20, window in 1usize..16) {
            let fs = 100.0;
            let base: Vec<f64> = (0..200).map(|k| ((k * 37 + 11) % 17) as f64 - 8.0).collect();
            let x = RealSeries::new(base.clone(), fs);
            let mut delayed = vec![0.0; delay];
            delayed.extend_from_slice(&base);
            let xd = RealSeries::new(delayed, fs);
            let e = short_time_energy(&x, window).unwrap();
            let ed = short_time_energy(&xd, window).unwrap();
            // Overlapping region: e[t] == ed[t + delay].
            for t in 0..e.len() {
                prop_assert!((e.values[t] - ed.values[t + delay]).abs() < 1e-9);
            }
        }

        #[test]
        fn ste_nonnegative(window in 1usize..32) {
            let x = RealSeries::new((0..128).map(|k| (k as f64 * 0.7).sin() * 3.0).collect(), 50.0);
            let e = short_time_energy(&x, window).unwrap();
            prop_assert!(e.values.iter().all(|&v| v >= 0.0));
        }
    }
}
