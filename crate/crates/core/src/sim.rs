//! Synthetic backscatter scenes with ground-truth labels.
//!
//! An articulator is modeled as a scattering point carried by a local frame
//! that translates and rotates; its radial velocity sets the Doppler shift
//! of the tag-reflected path. Scenes mix the direct path, the tag path
//! modulated by a square wave at the tag switching rate, optional
//! interferer paths, and Gaussian noise. Identical seeds produce
//! bit-identical recordings.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{Lexicon, LexiconError};
use crate::signal::{IqRecording, RealSeries};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("time {t} s outside motif duration {duration} s")]
    TimeOutOfRange { t: f64, duration: f64 },
    #[error("script has {tokens} tokens but {motifs} motifs")]
    ScriptMismatch { tokens: usize, motifs: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("file error: {0}")]
    File(#[from] crate::io::IoError),
    #[error("manifest serialization: {0}")]
    Json(#[from] serde_json::Error),
}

/// Deterministic 64-bit mix; used to derive independent per-utterance seeds
/// so parallel and serial corpus runs produce identical files.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(1)))
}

/// Scalar mouth-opening trajectory attached to a motif; scales the
/// tag-path magnitude as an area proxy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpeningProfile {
    pub base: f64,
    pub depth: f64,
}

impl OpeningProfile {
    pub fn value(&self, t_rel: f64, duration_s: f64) -> f64 {
        let s = (std::f64::consts::PI * t_rel / duration_s).sin();
        self.base + self.depth * s * s
    }
}

/// Per-unit articulator motion: local frame offset, translation velocity,
/// angular velocity, and the scattering point's local position. The
/// rotation is axis-angle about the angular-velocity direction, by |omega|*t.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinematicMotif {
    /// Transmit origin to rotation center, meters.
    pub frame_offset: [f64; 3],
    /// Translation velocity of the local frame, m/s.
    pub velocity: [f64; 3],
    /// Angular velocity vector, rad/s. Its direction is the rotation axis.
    pub omega: [f64; 3],
    /// Scattering point in the local frame, meters (mouth scale, |.| <= 0.05).
    pub scatter_local: [f64; 3],
    pub duration_s: f64,
    pub opening: OpeningProfile,
}

const MOUTH_SCALE_M: f64 = 0.05;

impl KinematicMotif {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.duration_s <= 0.0 {
            return Err(SimError::InvalidParam("motif duration must be positive".into()));
        }
        if norm3(self.scatter_local) > MOUTH_SCALE_M + 1e-12 {
            return Err(SimError::InvalidParam(format!(
                "scatter point {:?} outside mouth scale {} m",
                self.scatter_local, MOUTH_SCALE_M
            )));
        }
        Ok(())
    }
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn add3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale3(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Rodrigues rotation of `p` about unit `axis` by `angle`.
fn rotate(p: [f64; 3], axis: [f64; 3], angle: f64) -> [f64; 3] {
    let (s, c) = angle.sin_cos();
    let term1 = scale3(p, c);
    let term2 = scale3(cross3(axis, p), s);
    let term3 = scale3(axis, dot3(axis, p) * (1.0 - c));
    add3(add3(term1, term2), term3)
}

/// Rotated scattering point `R(t) * l`.
fn rotated_scatter(m: &KinematicMotif, t: f64) -> [f64; 3] {
    let w = norm3(m.omega);
    if w == 0.0 {
        m.scatter_local
    } else {
        let axis = scale3(m.omega, 1.0 / w);
        rotate(m.scatter_local, axis, w * t)
    }
}

/// Scattering-point position `L + v t + R(t) l`.
pub fn articulator_position(m: &KinematicMotif, t: f64) -> Result<[f64; 3], SimError> {
    if !(0.0..=m.duration_s).contains(&t) {
        return Err(SimError::TimeOutOfRange { t, duration: m.duration_s });
    }
    Ok(add3(add3(m.frame_offset, scale3(m.velocity, t)), rotated_scatter(m, t)))
}

/// Instantaneous velocity `v + omega x (R(t) l)`, the time derivative of
/// [`articulator_position`].
pub fn articulator_velocity(m: &KinematicMotif, t: f64) -> Result<[f64; 3], SimError> {
    if !(0.0..=m.duration_s).contains(&t) {
        return Err(SimError::TimeOutOfRange { t, duration: m.duration_s });
    }
    Ok(add3(m.velocity, cross3(m.omega, rotated_scatter(m, t))))
}

/// Baseband source waveform emitted by the RF carrier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SourceKind {
    /// Unit-amplitude constant envelope.
    ConstantEnvelope,
    /// Sum of equally spaced random-phase subcarriers within the bandwidth,
    /// normalized to unit average power.
    OfdmLike { subcarriers: usize, bandwidth_hz: f64 },
}

/// One non-tag propagation path with its own Doppler history. A
/// `modulated` interferer re-reflects the tag sidebands (multipath through
/// a mover), so it lands inside the isolation band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interferer {
    pub gain_re: f64,
    pub gain_im: f64,
    pub doppler: DopplerProfile,
    pub modulated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DopplerProfile {
    Static,
    /// Sinusoidal Doppler: `amp_hz * sin(2 pi rate_hz t)`.
    Sway { rate_hz: f64, amp_hz: f64 },
    /// Sway limited to `[start_s, start_s + duration_s)`, zero elsewhere.
    Burst { start_s: f64, duration_s: f64, rate_hz: f64, amp_hz: f64 },
}

impl DopplerProfile {
    fn shift_hz(&self, t: f64) -> f64 {
        match *self {
            DopplerProfile::Static => 0.0,
            DopplerProfile::Sway { rate_hz, amp_hz } => {
                amp_hz * (2.0 * std::f64::consts::PI * rate_hz * t).sin()
            }
            DopplerProfile::Burst { start_s, duration_s, rate_hz, amp_hz } => {
                if t >= start_s && t < start_s + duration_s {
                    amp_hz * (2.0 * std::f64::consts::PI * rate_hz * (t - start_s)).sin()
                } else {
                    0.0
                }
            }
        }
    }
}

/// Scene-level radio parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub carrier_hz: f64,
    pub wave_speed: f64,
    /// Tag switching fundamental. Non-paper default 2 kHz.
    pub delta_f1_hz: f64,
    /// Square-wave duty cycle in (0, 1).
    pub duty: f64,
    pub direct_gain_re: f64,
    pub direct_gain_im: f64,
    pub tag_gain_re: f64,
    pub tag_gain_im: f64,
    pub interferers: Vec<Interferer>,
    /// SNR relative to direct-path power; infinity disables noise.
    pub snr_db: f64,
    /// Receiver complex baseband rate. Non-paper default 20 kHz.
    pub sample_rate_hz: f64,
    /// Unit vector along the propagation direction.
    pub propagation_dir: [f64; 3],
    pub source: SourceKind,
    /// Motifs whose peak Doppler exceeds this produce a warning annotation.
    pub doppler_warn_hz: f64,
    /// Rate for the ground-truth Doppler trace in annotations.
    pub annotation_rate_hz: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            carrier_hz: 2.4e9,
            wave_speed: 3.0e8,
            delta_f1_hz: 2000.0,
            duty: 0.5,
            direct_gain_re: 1.0,
            direct_gain_im: 0.0,
            tag_gain_re: 0.5,
            tag_gain_im: 0.0,
            interferers: Vec::new(),
            snr_db: 30.0,
            sample_rate_hz: 20_000.0,
            propagation_dir: [1.0, 0.0, 0.0],
            source: SourceKind::ConstantEnvelope,
            doppler_warn_hz: 50.0,
            annotation_rate_hz: 1000.0,
        }
    }
}

impl SceneConfig {
    pub fn direct_gain(&self) -> Complex64 {
        Complex64::new(self.direct_gain_re, self.direct_gain_im)
    }

    pub fn tag_gain(&self) -> Complex64 {
        Complex64::new(self.tag_gain_re, self.tag_gain_im)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.sample_rate_hz <= 0.0 || self.carrier_hz <= 0.0 || self.wave_speed <= 0.0 {
            return Err(SimError::InvalidParam("rates and carrier must be positive".into()));
        }
        if self.delta_f1_hz >= self.sample_rate_hz / 2.0 {
            return Err(SimError::InvalidParam("delta_f1 must be below Nyquist".into()));
        }
        if !(0.0..1.0).contains(&self.duty) || self.duty == 0.0 {
            return Err(SimError::InvalidParam("duty must be in (0, 1)".into()));
        }
        let n = norm3(self.propagation_dir);
        if (n - 1.0).abs() > 1e-9 {
            return Err(SimError::InvalidParam("propagation_dir must be unit norm".into()));
        }
        if self.snr_db.is_nan() {
            return Err(SimError::InvalidParam("snr_db must not be NaN".into()));
        }
        Ok(())
    }
}

/// Doppler shift `(2 f / c) * (velocity . e_hat)` of the motif at time `t`.
pub fn doppler_shift(m: &KinematicMotif, cfg: &SceneConfig, t: f64) -> Result<f64, SimError> {
    if cfg.carrier_hz <= 0.0 {
        return Err(SimError::InvalidParam("carrier must be positive".into()));
    }
    let vel = articulator_velocity(m, t)?;
    Ok(2.0 * cfg.carrier_hz / cfg.wave_speed * dot3(vel, cfg.propagation_dir))
}

/// Peak Doppler of a motif, sampled on a 1 ms grid.
pub fn peak_doppler_hz(m: &KinematicMotif, cfg: &SceneConfig) -> f64 {
    let steps = (m.duration_s * 1000.0).ceil() as usize;
    (0..=steps)
        .map(|i| {
            let t = (i as f64 * 1e-3).min(m.duration_s);
            doppler_shift(m, cfg, t).map(f64::abs).unwrap_or(0.0)
        })
        .fold(0.0, f64::max)
}

/// Ground-truth token sequence plus per-token motifs for one utterance.
#[derive(Debug, Clone)]
pub struct UtteranceScript {
    /// Content token ids (no specials), one per motif.
    pub tokens: Vec<u32>,
    pub motifs: Vec<KinematicMotif>,
    pub inter_unit_gap_s: f64,
}

impl UtteranceScript {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.tokens.len() != self.motifs.len() {
            return Err(SimError::ScriptMismatch {
                tokens: self.tokens.len(),
                motifs: self.motifs.len(),
            });
        }
        if self.inter_unit_gap_s < 0.0 {
            return Err(SimError::InvalidParam("gap must be >= 0".into()));
        }
        for m in &self.motifs {
            m.validate()?;
        }
        Ok(())
    }

    pub fn duration_s(&self) -> f64 {
        let motion: f64 = self.motifs.iter().map(|m| m.duration_s).sum();
        motion + self.inter_unit_gap_s * (self.motifs.len() as f64 + 1.0)
    }
}

/// Exact unit boundaries, labels, and the sampled ground-truth Doppler trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneAnnotation {
    pub token_ids: Vec<u32>,
    pub unit_boundaries_s: Vec<(f64, f64)>,
    pub warnings: Vec<String>,
    /// Ground-truth tag Doppler at `annotation_rate_hz` (zero between units).
    pub doppler_hz: Vec<f64>,
    pub annotation_rate_hz: f64,
}

impl SceneAnnotation {
    pub fn doppler_series(&self) -> RealSeries {
        RealSeries::new(self.doppler_hz.clone(), self.annotation_rate_hz)
    }
}

/// Square-wave tag modulation, +1 for the duty fraction of each period.
fn tag_modulation(t: f64, delta_f1_hz: f64, duty: f64) -> f64 {
    if (t * delta_f1_hz).rem_euclid(1.0) < duty {
        1.0
    } else {
        -1.0
    }
}

fn source_samples(
    kind: &SourceKind,
    n: usize,
    fs: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Complex64> {
    match kind {
        SourceKind::ConstantEnvelope => vec![Complex64::new(1.0, 0.0); n],
        SourceKind::OfdmLike { subcarriers, bandwidth_hz } => {
            let m = (*subcarriers).max(1);
            let phases: Vec<f64> =
                (0..m).map(|_| rng.random::<f64>() * 2.0 * std::f64::consts::PI).collect();
            let freqs: Vec<f64> = (0..m)
                .map(|i| {
                    if m == 1 {
                        0.0
                    } else {
                        -bandwidth_hz / 2.0 + bandwidth_hz * i as f64 / (m - 1) as f64
                    }
                })
                .collect();
            let norm = 1.0 / (m as f64).sqrt();
            (0..n)
                .map(|k| {
                    let t = k as f64 / fs;
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (f, p) in freqs.iter().zip(&phases) {
                        let ph = 2.0 * std::f64::consts::PI * f * t + p;
                        acc += Complex64::new(ph.cos(), ph.sin());
                    }
                    acc * norm
                })
                .collect()
        }
    }
}

fn gaussian_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    // Box-Muller; kept local so noise streams are pinned by this crate.
    let u1: f64 = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break u;
        }
    };
    let u2: f64 = rng.random();
    let r = (-2.0 * u1.ln()).sqrt();
    let th = 2.0 * std::f64::consts::PI * u2;
    (r * th.cos(), r * th.sin())
}

/// Mix the direct path, Doppler-modulated tag path, interferers, and noise
/// into one labeled recording. Identical seeds give bit-identical output.
pub fn synthesize_scene(
    script: &UtteranceScript,
    cfg: &SceneConfig,
    seed: u64,
) -> Result<(IqRecording, SceneAnnotation), SimError> {
    script.validate()?;
    cfg.validate()?;
    let fs = cfg.sample_rate_hz;
    let total_s = script.duration_s();
    let n = (total_s * fs).round() as usize;
    if n == 0 {
        return Err(SimError::InvalidParam("empty scene".into()));
    }

    // Unit layout: gap, unit, gap, unit, ..., gap.
    let mut boundaries = Vec::with_capacity(script.motifs.len());
    let mut cursor = script.inter_unit_gap_s;
    for m in &script.motifs {
        boundaries.push((cursor, cursor + m.duration_s));
        cursor += m.duration_s + script.inter_unit_gap_s;
    }

    let mut warnings = Vec::new();
    for (i, m) in script.motifs.iter().enumerate() {
        let peak = peak_doppler_hz(m, cfg);
        if peak > cfg.doppler_warn_hz {
            warnings.push(format!(
                "motif {} peak Doppler {:.1} Hz exceeds {:.1} Hz",
                i, peak, cfg.doppler_warn_hz
            ));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let source = source_samples(&cfg.source, n, fs, &mut rng);

    let h_d = cfg.direct_gain();
    let h_b0 = cfg.tag_gain();
    let dt = 1.0 / fs;
    let tag_enabled = h_b0.norm_sqr() > 0.0;

    // Tag path: accumulated Doppler phase plus opening-scaled magnitude.
    let mut tag_phase = 0.0_f64;
    let mut unit_idx = 0usize;
    let mut samples = Vec::with_capacity(n);
    let mut interferer_phases = vec![0.0_f64; cfg.interferers.len()];

    let noise_sigma = if cfg.snr_db.is_finite() {
        let p_direct = h_d.norm_sqr().max(1e-300);
        (p_direct * 10f64.powf(-cfg.snr_db / 10.0)).sqrt()
    } else {
        0.0
    };

    for k in 0..n {
        let t = k as f64 * dt;
        while unit_idx < boundaries.len() && t >= boundaries[unit_idx].1 {
            unit_idx += 1;
        }
        let active = unit_idx < boundaries.len() && t >= boundaries[unit_idx].0;

        let (f_d, opening) = if active && tag_enabled {
            let m = &script.motifs[unit_idx];
            let t_rel = (t - boundaries[unit_idx].0).min(m.duration_s);
            let f_d = doppler_shift(m, cfg, t_rel)?;
            (f_d, m.opening.value(t_rel, m.duration_s))
        } else {
            (0.0, 1.0)
        };
        tag_phase += 2.0 * std::f64::consts::PI * f_d * dt;

        let x = source[k];
        let direct = h_d * x;
        let tag = if tag_enabled {
            let modulation = tag_modulation(t, cfg.delta_f1_hz, cfg.duty);
            h_b0 * opening
                * Complex64::new(tag_phase.cos(), tag_phase.sin())
                * modulation
                * x
        } else {
            Complex64::new(0.0, 0.0)
        };

        let mut acc = direct + tag;
        for (i, intf) in cfg.interferers.iter().enumerate() {
            interferer_phases[i] +=
                2.0 * std::f64::consts::PI * intf.doppler.shift_hz(t) * dt;
            let mut path = Complex64::new(intf.gain_re, intf.gain_im)
                * Complex64::new(interferer_phases[i].cos(), interferer_phases[i].sin())
                * x;
            if intf.modulated {
                path *= tag_modulation(t, cfg.delta_f1_hz, cfg.duty);
            }
            acc += path;
        }

        if noise_sigma > 0.0 {
            let (g1, g2) = gaussian_pair(&mut rng);
            acc += Complex64::new(g1, g2) * (noise_sigma / std::f64::consts::SQRT_2);
        }
        samples.push(acc);
    }

    // Ground-truth Doppler trace on the annotation grid.
    let ann_n = (total_s * cfg.annotation_rate_hz).round() as usize;
    let mut doppler_hz = Vec::with_capacity(ann_n);
    let mut ui = 0usize;
    for k in 0..ann_n {
        let t = k as f64 / cfg.annotation_rate_hz;
        while ui < boundaries.len() && t >= boundaries[ui].1 {
            ui += 1;
        }
        let f_d = if ui < boundaries.len() && t >= boundaries[ui].0 {
            let m = &script.motifs[ui];
            doppler_shift(m, cfg, (t - boundaries[ui].0).min(m.duration_s))?
        } else {
            0.0
        };
        doppler_hz.push(f_d);
    }

    Ok((
        IqRecording::new(samples, fs),
        SceneAnnotation {
            token_ids: script.tokens.clone(),
            unit_boundaries_s: boundaries,
            warnings,
            doppler_hz,
            annotation_rate_hz: cfg.annotation_rate_hz,
        },
    ))
}

/// Distribution over motifs for one token: a base motif plus relative
/// jitter ranges applied per utterance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MotifTemplate {
    pub base: KinematicMotif,
    /// Relative jitter on |omega| (articulation speed).
    pub speed_jitter: f64,
    /// Relative jitter on the scatter radius (motion amplitude).
    pub amp_jitter: f64,
    pub duration_jitter: f64,
}

impl MotifTemplate {
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> KinematicMotif {
        let mut m = self.base.clone();
        let jitter = |rng: &mut ChaCha8Rng, r: f64| 1.0 + r * (2.0 * rng.random::<f64>() - 1.0);
        let speed = jitter(rng, self.speed_jitter);
        let amp = jitter(rng, self.amp_jitter);
        let dur = jitter(rng, self.duration_jitter);
        let phase0 = rng.random::<f64>() * 2.0 * std::f64::consts::PI;
        m.omega = scale3(m.omega, speed);
        // Random initial rotation phase: spin the scatter point about the axis.
        let w = norm3(m.omega);
        if w > 0.0 {
            let axis = scale3(m.omega, 1.0 / w);
            m.scatter_local = rotate(m.scatter_local, axis, phase0);
        }
        // Amplitude jitter trades radius against the mouth-scale cap.
        let r = norm3(m.scatter_local);
        if r > 0.0 {
            let target = (r * amp).min(MOUTH_SCALE_M);
            m.scatter_local = scale3(m.scatter_local, target / r);
        }
        m.duration_s *= dur;
        m
    }
}

/// Token-id-keyed motif distributions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MotifBank {
    pub entries: BTreeMap<u32, MotifTemplate>,
}

impl MotifBank {
    /// Assign every token a distinct (rotation rate, Doppler amplitude)
    /// cell from a fixed grid, orthogonal to the propagation direction so
    /// the radial velocity is a clean sinusoid. The amplitude index
    /// rotates with the frequency row, so tokens sharing a rotation rate
    /// never share an amplitude (collision-free for up to 48 tokens).
    pub fn synthetic_grid(token_ids: &[u32], cfg: &SceneConfig) -> Self {
        const ROT_HZ: [f64; 12] =
            [5.0, 8.5, 12.0, 15.5, 19.0, 22.5, 26.0, 29.5, 33.0, 36.5, 40.0, 43.5];
        const DOPPLER_PEAK_HZ: [f64; 4] = [6.0, 12.0, 21.0, 34.0];
        let mut ids: Vec<u32> = token_ids.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let mut entries = BTreeMap::new();
        let k_doppler = 2.0 * cfg.carrier_hz / cfg.wave_speed;
        for (i, &id) in ids.iter().enumerate() {
            let f_rot = ROT_HZ[i % ROT_HZ.len()];
            let amp_idx = (i + i / ROT_HZ.len()) % DOPPLER_PEAK_HZ.len();
            let a_dopp = DOPPLER_PEAK_HZ[amp_idx];
            let omega = 2.0 * std::f64::consts::PI * f_rot;
            // Peak radial speed omega*r gives Doppler k_doppler*omega*r.
            let radius = (a_dopp / (k_doppler * omega)).min(MOUTH_SCALE_M);
            let base = KinematicMotif {
                frame_offset: [0.5, 0.0, 0.0],
                velocity: [0.0, 0.0, 0.0],
                omega: [0.0, 0.0, omega],
                scatter_local: [radius, 0.0, 0.0],
                duration_s: 0.35,
                opening: OpeningProfile { base: 1.0, depth: 0.6 },
            };
            entries.insert(
                id,
                MotifTemplate {
                    base,
                    speed_jitter: 0.04,
                    amp_jitter: 0.06,
                    duration_jitter: 0.08,
                },
            );
        }
        Self { entries }
    }

    pub fn script_for(
        &self,
        token_ids: &[u32],
        inter_unit_gap_s: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<UtteranceScript, SimError> {
        let mut motifs = Vec::with_capacity(token_ids.len());
        for id in token_ids {
            let tpl = self
                .entries
                .get(id)
                .ok_or_else(|| SimError::InvalidParam(format!("no motif for token {id}")))?;
            motifs.push(tpl.sample(rng));
        }
        Ok(UtteranceScript { tokens: token_ids.to_vec(), motifs, inter_unit_gap_s })
    }
}

/// One dataset manifest record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestRow {
    pub iq_path: String,
    pub transcript: String,
    pub token_ids: Vec<u32>,
    pub unit_boundaries_s: Vec<(f64, f64)>,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RejectedSentence {
    pub sentence: String,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct CorpusManifest {
    pub rows: Vec<ManifestRow>,
    pub rejected: Vec<RejectedSentence>,
}

impl CorpusManifest {
    pub fn save(&self, dir: &Path) -> Result<(), SimError> {
        let mut lines = String::new();
        for row in &self.rows {
            lines.push_str(&serde_json::to_string(row)?);
            lines.push('\n');
        }
        std::fs::write(dir.join("manifest.jsonl"), lines)?;
        if !self.rejected.is_empty() {
            std::fs::write(
                dir.join("rejections.json"),
                serde_json::to_string_pretty(&self.rejected)?,
            )?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(dir.join("manifest.jsonl"))?;
        let mut rows = Vec::new();
        for line in text.lines() {
            if !line.trim().is_empty() {
                rows.push(serde_json::from_str(line)?);
            }
        }
        let rej_path = dir.join("rejections.json");
        let rejected = if rej_path.exists() {
            serde_json::from_str(&std::fs::read_to_string(rej_path)?)?
        } else {
            Vec::new()
        };
        Ok(Self { rows, rejected })
    }
}

#[derive(Debug, Clone)]
pub struct CorpusParams {
    pub n_per_sentence: usize,
    pub inter_unit_gap_s: f64,
}

impl Default for CorpusParams {
    fn default() -> Self {
        Self { n_per_sentence: 1, inter_unit_gap_s: 0.4 }
    }
}

/// Tokenize every sentence, synthesize `n_per_sentence` jittered
/// recordings each, and write IQ files plus the dataset manifest.
/// Untokenizable sentences are listed in the rejection report and skipped.
pub fn generate_corpus(
    sentences: &[String],
    lexicon: &Lexicon,
    motif_bank: &MotifBank,
    params: &CorpusParams,
    cfg: &SceneConfig,
    seed: u64,
    out_dir: &Path,
) -> Result<CorpusManifest, SimError> {
    std::fs::create_dir_all(out_dir)?;
    let mut accepted: Vec<(String, Vec<u32>)> = Vec::new();
    let mut rejected = Vec::new();
    for sentence in sentences {
        match lexicon.tokenize(sentence) {
            Ok(seq) => accepted.push((sentence.clone(), lexicon.content_ids(&seq))),
            Err(LexiconError::Untokenizable { word, .. }) => rejected.push(RejectedSentence {
                sentence: sentence.clone(),
                reason: format!("untokenizable word: {word}"),
            }),
            Err(e) => rejected.push(RejectedSentence {
                sentence: sentence.clone(),
                reason: e.to_string(),
            }),
        }
    }

    let jobs: Vec<(usize, usize)> = (0..accepted.len())
        .flat_map(|s| (0..params.n_per_sentence).map(move |r| (s, r)))
        .collect();

    let rows: Result<Vec<ManifestRow>, SimError> = jobs
        .par_iter()
        .enumerate()
        .map(|(utt_index, &(s_idx, _rep))| {
            let (sentence, token_ids) = &accepted[s_idx];
            let utt_seed = derive_seed(seed, utt_index as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(utt_seed);
            let script = motif_bank.script_for(token_ids, params.inter_unit_gap_s, &mut rng)?;
            let scene_seed = derive_seed(utt_seed, 0xC0FFEE);
            let (iq, ann) = synthesize_scene(&script, cfg, scene_seed)?;
            let name = format!("utt_{utt_index:05}");
            let iq_rel: PathBuf = PathBuf::from(format!("{name}.iq"));
            crate::io::write_iq(&out_dir.join(&iq_rel), &iq)?;
            Ok(ManifestRow {
                iq_path: iq_rel.to_string_lossy().into_owned(),
                transcript: sentence.clone(),
                token_ids: token_ids.clone(),
                unit_boundaries_s: ann.unit_boundaries_s,
                seed: utt_seed,
            })
        })
        .collect();

    let manifest = CorpusManifest { rows: rows?, rejected };
    manifest.save(out_dir)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn test_motif() -> KinematicMotif {
        KinematicMotif {
            frame_offset: [0.5, 0.1, -0.2],
            velocity: [0.02, -0.01, 0.03],
            omega: [0.0, 0.0, 40.0],
            scatter_local: [0.02, 0.01, 0.005],
            duration_s: 0.5,
            opening: OpeningProfile { base: 1.0, depth: 0.5 },
        }
    }

    fn random_motif(rng: &mut ChaCha8Rng) -> KinematicMotif {
        let r = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| lo + (hi - lo) * rng.random::<f64>();
        KinematicMotif {
            frame_offset: [r(rng, -1.0, 1.0), r(rng, -1.0, 1.0), r(rng, -1.0, 1.0)],
            velocity: [r(rng, -0.3, 0.3), r(rng, -0.3, 0.3), r(rng, -0.3, 0.3)],
            omega: [r(rng, -60.0, 60.0), r(rng, -60.0, 60.0), r(rng, -60.0, 60.0)],
            scatter_local: [r(rng, -0.02, 0.02), r(rng, -0.02, 0.02), r(rng, -0.02, 0.02)],
            duration_s: r(rng, 0.2, 0.8),
            opening: OpeningProfile { base: 1.0, depth: 0.3 },
        }
    }

    #[test]
    fn static_motif_position_constant() {
        let mut m = test_motif();
        m.velocity = [0.0; 3];
        m.omega = [0.0; 3];
        let p0 = articulator_position(&m, 0.0).unwrap();
        for i in 1..10 {
            let p = articulator_position(&m, m.duration_s * i as f64 / 10.0).unwrap();
            assert_eq!(p, p0);
        }
        assert_eq!(p0, add3(m.frame_offset, m.scatter_local));
    }

    #[test]
    fn pure_translation() {
        let mut m = test_motif();
        m.omega = [0.0; 3];
        let p0 = articulator_position(&m, 0.0).unwrap();
        let t = 0.37;
        let p = articulator_position(&m, t).unwrap();
        for i in 0..3 {
            assert_relative_eq!(p[i] - p0[i], m.velocity[i] * t, epsilon = 1e-12);
        }
    }

    #[test]
    fn full_turn_returns_to_start() {
        let mut m = test_motif();
        m.velocity = [0.0; 3];
        m.omega = [0.0, 0.0, 30.0];
        m.scatter_local = [0.02, 0.01, 0.0]; // perpendicular to the axis
        m.duration_s = 1.0;
        let period = 2.0 * std::f64::consts::PI / 30.0;
        let p0 = articulator_position(&m, 0.0).unwrap();
        let p1 = articulator_position(&m, period).unwrap();
        for i in 0..3 {
            assert_relative_eq!(p0[i], p1[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn velocity_is_position_derivative() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let m = random_motif(&mut rng);
            let t = 0.1 * m.duration_s + 0.8 * m.duration_s * rng.random::<f64>();
            let h = 1e-6;
            let pp = articulator_position(&m, t + h).unwrap();
            let pm = articulator_position(&m, t - h).unwrap();
            let v = articulator_velocity(&m, t).unwrap();
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..3 {
                let fd = (pp[i] - pm[i]) / (2.0 * h);
                num += (fd - v[i]) * (fd - v[i]);
                den += v[i] * v[i];
            }
            assert!(num.sqrt() < 1e-5 * den.sqrt().max(1e-9), "fd mismatch");
        }
    }

    #[test]
    fn circular_speed_identity() {
        let mut m = test_motif();
        m.velocity = [0.0; 3];
        m.omega = [0.0, 0.0, 25.0];
        m.scatter_local = [0.03, 0.0, 0.0];
        for i in 0..20 {
            let t = m.duration_s * i as f64 / 20.0;
            let v = articulator_velocity(&m, t).unwrap();
            assert_relative_eq!(norm3(v), 25.0 * 0.03, epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_out_of_range_time() {
        let m = test_motif();
        assert!(articulator_position(&m, -0.1).is_err());
        assert!(articulator_position(&m, m.duration_s + 0.1).is_err());
    }

    #[test]
    fn doppler_radial_value() {
        let cfg = SceneConfig::default();
        let m = KinematicMotif {
            frame_offset: [0.5, 0.0, 0.0],
            velocity: [0.1, 0.0, 0.0],
            omega: [0.0; 3],
            scatter_local: [0.0; 3],
            duration_s: 1.0,
            opening: OpeningProfile { base: 1.0, depth: 0.0 },
        };
        let f_d = doppler_shift(&m, &cfg, 0.5).unwrap();
        assert_relative_eq!(f_d, 1.6, max_relative = 1e-12);
    }

    #[test]
    fn doppler_zero_cases() {
        let cfg = SceneConfig::default();
        let mut m = test_motif();
        m.velocity = [0.0; 3];
        m.omega = [0.0; 3];
        assert_eq!(doppler_shift(&m, &cfg, 0.1).unwrap(), 0.0);
        // Velocity orthogonal to the propagation direction.
        m.velocity = [0.0, 0.25, 0.0];
        assert_eq!(doppler_shift(&m, &cfg, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn doppler_sign_flips_with_velocity() {
        let cfg = SceneConfig::default();
        let mut m = test_motif();
        m.omega = [0.0; 3];
        m.velocity = [0.12, 0.0, 0.0];
        let f1 = doppler_shift(&m, &cfg, 0.2).unwrap();
        m.velocity = [-0.12, 0.0, 0.0];
        let f2 = doppler_shift(&m, &cfg, 0.2).unwrap();
        assert_eq!(f1, -f2);
        assert!(f1 > 0.0);
    }

    fn quiet_scene(script: &UtteranceScript, cfg: &SceneConfig) -> IqRecording {
        synthesize_scene(script, cfg, 42).unwrap().0
    }

    #[test]
    fn square_wave_harmonics_only() {
        let mut cfg = SceneConfig::default();
        cfg.snr_db = f64::INFINITY;
        let script = UtteranceScript {
            tokens: vec![],
            motifs: vec![],
            inter_unit_gap_s: 0.512, // 1024 samples either side of units
        };
        let iq = quiet_scene(&script, &cfg);
        // Integer number of square-wave periods so harmonics land on bins.
        let n = 8000;
        let mut planner = rustfft::FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let mut buf: Vec<rustfft::num_complex::Complex<f64>> = iq.samples[..n]
            .iter()
            .map(|s| rustfft::num_complex::Complex::new(s.re, s.im))
            .collect();
        fft.process(&mut buf);
        let power: Vec<f64> = buf.iter().map(|c| c.norm_sqr()).collect();
        let peak = power.iter().cloned().fold(0.0, f64::max);
        // Harmonic bins: 0 and odd multiples of delta_f1 (aliases included
        // via the mirrored bin; the Nyquist-folded harmonic counts too).
        let bin_per_hz = n as f64 / cfg.sample_rate_hz;
        let mut allowed = vec![0usize];
        let mut h = 1;
        while (h as f64) * cfg.delta_f1_hz <= cfg.sample_rate_hz / 2.0 {
            let b = (h as f64 * cfg.delta_f1_hz * bin_per_hz).round() as usize;
            allowed.push(b);
            allowed.push(n - b);
            h += 2;
        }
        let floor = power
            .iter()
            .enumerate()
            .filter(|(i, _)| allowed.iter().all(|a| (*i as isize - *a as isize).abs() > 2))
            .map(|(_, p)| *p)
            .fold(0.0, f64::max);
        assert!(floor < peak * 1e-4, "sidelobe floor {}", floor / peak);
    }

    #[test]
    fn degenerate_tag_equals_direct_path() {
        let mut cfg = SceneConfig::default();
        cfg.tag_gain_re = 0.0;
        cfg.snr_db = f64::INFINITY;
        let script = UtteranceScript { tokens: vec![], motifs: vec![], inter_unit_gap_s: 0.1 };
        let iq = quiet_scene(&script, &cfg);
        for s in &iq.samples {
            assert_eq!(*s, Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn same_seed_bit_identical() {
        let cfg = SceneConfig::default();
        let script = UtteranceScript {
            tokens: vec![0],
            motifs: vec![test_motif()],
            inter_unit_gap_s: 0.2,
        };
        let a = synthesize_scene(&script, &cfg, 99).unwrap().0;
        let b = synthesize_scene(&script, &cfg, 99).unwrap().0;
        assert_eq!(a.samples, b.samples);
        let c = synthesize_scene(&script, &cfg, 100).unwrap().0;
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn scene_linearity() {
        let mut full = SceneConfig::default();
        full.snr_db = f64::INFINITY;
        let mut tag_only = full.clone();
        tag_only.direct_gain_re = 0.0;
        let mut direct_only = full.clone();
        direct_only.tag_gain_re = 0.0;
        let script = UtteranceScript {
            tokens: vec![0],
            motifs: vec![test_motif()],
            inter_unit_gap_s: 0.15,
        };
        let f = quiet_scene(&script, &full);
        let t = quiet_scene(&script, &tag_only);
        let d = quiet_scene(&script, &direct_only);
        for i in 0..f.len() {
            let sum = t.samples[i] + d.samples[i];
            assert!((f.samples[i] - sum).norm() < 1e-12);
        }
    }

    #[test]
    fn annotation_boundaries_and_warnings() {
        let mut cfg = SceneConfig::default();
        cfg.snr_db = f64::INFINITY;
        cfg.doppler_warn_hz = 5.0;
        let m = test_motif();
        let script = UtteranceScript {
            tokens: vec![3, 4],
            motifs: vec![m.clone(), m],
            inter_unit_gap_s: 0.25,
        };
        let (_, ann) = synthesize_scene(&script, &cfg, 1).unwrap();
        assert_eq!(ann.unit_boundaries_s.len(), 2);
        assert_relative_eq!(ann.unit_boundaries_s[0].0, 0.25);
        assert_relative_eq!(ann.unit_boundaries_s[0].1, 0.75);
        assert_relative_eq!(ann.unit_boundaries_s[1].0, 1.0);
        assert!(!ann.warnings.is_empty(), "low warn threshold must trigger");
        assert_eq!(ann.token_ids, vec![3, 4]);
    }
}
