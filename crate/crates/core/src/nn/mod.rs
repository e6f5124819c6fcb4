//! Neural sequence inference: STFT frontend, a small encoder-decoder
//! trained with teacher-forced cross-entropy, cluster-pseudo-label
//! pretraining, and beam-search decoding.
//!
//! Everything runs in f64 with hand-written backward passes; analytic
//! gradients are validated against central finite differences in the test
//! suite. Fixed seeds give bit-reproducible training trajectories.

pub mod beam;
pub mod checkpoint;
pub mod layers;
pub mod model;
pub mod tensor;
pub mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::isolate::MotionTrace;
use crate::signal::{stft, RealSeries, WindowFn};
use tensor::Mat;

pub use beam::{beam_search, greedy_decode, BeamConfig, BeamHypothesis};
pub use model::{ModelConfig, Seq2Seq, UnitClassifier};
pub use train::{pretrain_units, train_seq2seq, AdamConfig, TrainConfig};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("token id {id} out of vocabulary {vocab}")]
    TokenOverflow { id: u32, vocab: usize },
    #[error("sequence length {len} exceeds maximum {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("need at least 2 classes, got {0}")]
    TooFewClasses(usize),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("trace rate {got} Hz does not match frontend rate {want} Hz")]
    RateMismatch { got: f64, want: f64 },
    #[error("trace too short: {len} samples < one {window} window")]
    TraceTooShort { len: usize, window: usize },
    #[error("bad checkpoint {path}: {reason}")]
    BadCheckpoint { path: String, reason: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// STFT frontend settings. The reference framing is a 1 kHz trace with a
/// 256-sample window and 10-sample hop; the toy pipeline widens the hop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontendConfig {
    pub resample_hz: f64,
    pub window_len: usize,
    pub hop: usize,
    pub log_floor: f64,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        Self { resample_hz: 1000.0, window_len: 256, hop: 10, log_floor: 1e-10 }
    }
}

impl FrontendConfig {
    /// Frequency bins per frame (one-sided).
    pub fn n_bins(&self) -> usize {
        self.window_len / 2 + 1
    }
}

/// Log-power frames plus the padding bookkeeping. `pad_mask[t]` is true
/// for real frames; padded rows are zero.
#[derive(Debug, Clone)]
pub struct FrameSequence {
    /// (T, F) log-power.
    pub frames: Mat,
    pub pad_mask: Vec<bool>,
}

impl FrameSequence {
    pub fn real_len(&self) -> usize {
        self.pad_mask.iter().filter(|&&r| r).count()
    }
}

/// Spectrogram frontend over a motion trace (gap samples are zeros).
/// The trace must already be at the frontend rate; callers resample with
/// [`RealSeries::resample_linear`] when needed.
pub fn featurize_trace(
    trace: &MotionTrace,
    cfg: &FrontendConfig,
) -> Result<FrameSequence, NnError> {
    featurize_series(&trace.values, cfg)
}

pub fn featurize_series(
    series: &RealSeries,
    cfg: &FrontendConfig,
) -> Result<FrameSequence, NnError> {
    if (series.sample_rate_hz - cfg.resample_hz).abs() > 1e-6 * cfg.resample_hz {
        return Err(NnError::RateMismatch { got: series.sample_rate_hz, want: cfg.resample_hz });
    }
    if series.len() < cfg.window_len {
        return Err(NnError::TraceTooShort { len: series.len(), window: cfg.window_len });
    }
    let sg = stft(series, cfg.window_len, cfg.hop, WindowFn::Hann)
        .map_err(|e| NnError::InvalidConfig(e.to_string()))?;
    let mut frames = Mat::zeros(sg.t_len, sg.f_len);
    for t in 0..sg.t_len {
        for (slot, &p) in frames.row_mut(t).iter_mut().zip(sg.frame(t)) {
            *slot = p.max(cfg.log_floor).ln();
        }
    }
    let pad_mask = vec![true; sg.t_len];
    Ok(FrameSequence { frames, pad_mask })
}
