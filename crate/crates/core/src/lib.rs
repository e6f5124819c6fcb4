//! Backscatter lip-motion sensing and decoding pipeline.
//!
//! The crate covers the full chain from synthetic scene generation to
//! sentence-level evaluation:
//!
//! - [`signal`]: complex baseband containers and DSP primitives (short-time
//!   energy, STFT, FIR filtering, frequency shifting).
//! - [`sim`]: kinematic articulator model, Doppler synthesis, and labeled
//!   backscatter scene/corpus generation.
//! - [`isolate`]: tag sideband isolation, phase-difference traces, MAD
//!   gating, and variational mode decomposition.
//! - [`segment`]: energy-based lip-motion unit segmentation.
//! - [`features`]: 67-dimensional unit descriptors, z-score scaling, and
//!   deterministic k-means clustering.
//! - [`lexicon`]: subword lexicon construction by iterative pair merging,
//!   tokenization and detokenization.
//! - [`nn`]: a small self-contained encoder–decoder with cluster-label
//!   pretraining, cross-entropy training, and beam-search inference.
//! - [`eval`]: word error rate and word accuracy metrics.
//! - [`pipeline`]: cached end-to-end orchestration of all stages.

pub mod config;
pub mod eval;
pub mod features;
pub mod io;
pub mod isolate;
pub mod lexicon;
pub mod nn;
pub mod pipeline;
pub mod segment;
pub mod signal;
pub mod sim;
