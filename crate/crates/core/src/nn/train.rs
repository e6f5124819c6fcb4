//! Adam optimizer with linear warmup, and the two training entry points:
//! cluster-pseudo-label pretraining and teacher-forced sequence training.
//!
//! Batch items run in parallel with per-item gradient buffers that are
//! summed in index order, so fixed seeds reproduce loss trajectories
//! exactly regardless of thread count.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::layers::{add_grads, zeros_like, ParamVisit};
use super::model::{
    cross_entropy, cross_entropy_class, Encoder, ModelConfig, Seq2Seq, UnitClassifier,
};
use super::tensor::Mat;
use super::{FrameSequence, NnError};
use crate::lexicon::{TokenSequence, BOS_ID, EOS_ID};
use crate::sim::derive_seed;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Linear warmup steps; the rate is constant afterwards.
    pub warmup_steps: usize,
    pub grad_clip: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            warmup_steps: 200,
            grad_clip: Some(1.0),
        }
    }
}

/// Optimizer state mirrors the model structure.
pub struct Adam<T: ParamVisit + Clone> {
    cfg: AdamConfig,
    m: T,
    v: T,
    t: usize,
}

impl<T: ParamVisit + Clone> Adam<T> {
    pub fn new(model: &T, cfg: AdamConfig) -> Self {
        Self { cfg, m: zeros_like(model), v: zeros_like(model), t: 0 }
    }

    pub fn step(&mut self, model: &mut T, grads: &mut T) {
        self.t += 1;
        let warm = if self.cfg.warmup_steps > 0 {
            (self.t as f64 / self.cfg.warmup_steps as f64).min(1.0)
        } else {
            1.0
        };
        let lr = self.cfg.lr * warm;

        if let Some(max_norm) = self.cfg.grad_clip {
            let total_sq: f64 = grads.params().iter().map(|g| g.frobenius_sq()).sum();
            let norm = total_sq.sqrt();
            if norm > max_norm {
                let scale = max_norm / norm;
                for g in grads.params_mut() {
                    g.scale(scale);
                }
            }
        }

        let bc1 = 1.0 - self.cfg.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.cfg.beta2.powi(self.t as i32);
        let mut ps = model.params_mut();
        let gs = grads.params();
        let mut ms = self.m.params_mut();
        let mut vs = self.v.params_mut();
        for i in 0..ps.len() {
            let p = &mut ps[i];
            let g = gs[i];
            let m = &mut ms[i];
            let v = &mut vs[i];
            for j in 0..p.data.len() {
                let gj = g.data[j];
                m.data[j] = self.cfg.beta1 * m.data[j] + (1.0 - self.cfg.beta1) * gj;
                v.data[j] = self.cfg.beta2 * v.data[j] + (1.0 - self.cfg.beta2) * gj * gj;
                let mhat = m.data[j] / bc1;
                let vhat = v.data[j] / bc2;
                p.data[j] -= lr * mhat / (vhat.sqrt() + self.cfg.eps);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 30, batch_size: 8, adam: AdamConfig::default() }
    }
}

/// Decoder input (BOS-shifted) and target rows for one token sequence.
pub fn teacher_forcing_pair(tokens: &TokenSequence) -> (Vec<u32>, Vec<u32>) {
    let mut target = tokens.ids.clone();
    if target.last() != Some(&EOS_ID) {
        target.push(EOS_ID);
    }
    let mut input = Vec::with_capacity(target.len());
    input.push(BOS_ID);
    input.extend_from_slice(&target[..target.len() - 1]);
    (input, target)
}

/// Train the encoder to predict cluster pseudo-labels from unit
/// spectrograms. Returns the trained classifier (its encoder seeds the
/// sequence model) and the mean loss per epoch.
pub fn pretrain_units(
    dataset: &[(FrameSequence, usize)],
    n_classes: usize,
    cfg: &ModelConfig,
    train: &TrainConfig,
    seed: u64,
) -> Result<(UnitClassifier, Vec<f64>), NnError> {
    if dataset.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    let mut seen = vec![false; n_classes];
    for (_, label) in dataset {
        if *label >= n_classes {
            return Err(NnError::InvalidConfig(format!(
                "label {label} out of range {n_classes}"
            )));
        }
        seen[*label] = true;
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(NnError::TooFewClasses(1));
    }

    let mut model = UnitClassifier::new(cfg, n_classes, derive_seed(seed, 1))?;
    let mut adam = Adam::new(&model, train.adam);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2));
    let mut epoch_losses = Vec::with_capacity(train.epochs);
    let mut step = 0u64;
    for _epoch in 0..train.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(train.batch_size.max(1)) {
            let results: Vec<(UnitClassifier, f64)> = chunk
                .par_iter()
                .enumerate()
                .map(|(slot, &idx)| {
                    let (frames, label) = &dataset[idx];
                    let mut grads = zeros_like(&model);
                    let mut drop_rng = ChaCha8Rng::seed_from_u64(derive_seed(
                        seed,
                        0x0D0D ^ (step << 8) ^ slot as u64,
                    ));
                    let rng_opt =
                        if cfg.dropout > 0.0 { Some(&mut drop_rng) } else { None };
                    let (logits, cache) = model
                        .forward(&frames.frames, &frames.pad_mask, rng_opt)
                        .expect("validated dataset");
                    let (loss, mut g) = cross_entropy_class(&logits, *label);
                    for gv in &mut g {
                        *gv /= chunk.len() as f64;
                    }
                    model.backward(&cache, &g, &mut grads);
                    (grads, loss)
                })
                .collect();
            let mut grads = zeros_like(&model);
            let mut batch_loss = 0.0;
            for (g, l) in &results {
                add_grads(&mut grads, g);
                batch_loss += l;
            }
            epoch_loss += batch_loss;
            adam.step(&mut model, &mut grads);
            step += 1;
        }
        epoch_losses.push(epoch_loss / dataset.len() as f64);
    }
    Ok((model, epoch_losses))
}

/// Teacher-forced cross-entropy training of the full encoder-decoder.
/// `init` optionally seeds the encoder with pretrained parameters.
pub fn train_seq2seq(
    dataset: &[(FrameSequence, TokenSequence)],
    cfg: &ModelConfig,
    init: Option<&Encoder>,
    train: &TrainConfig,
    seed: u64,
) -> Result<(Seq2Seq, Vec<f64>), NnError> {
    if dataset.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    for (_, tokens) in dataset {
        for &id in &tokens.ids {
            if id as usize >= cfg.vocab_size {
                return Err(NnError::TokenOverflow { id, vocab: cfg.vocab_size });
            }
        }
    }

    let mut model = Seq2Seq::new(cfg, derive_seed(seed, 11))?;
    if let Some(enc) = init {
        model = model.with_encoder(enc.clone());
    }
    let mut adam = Adam::new(&model, train.adam);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 12));
    let pairs: Vec<(Vec<u32>, Vec<u32>)> =
        dataset.iter().map(|(_, t)| teacher_forcing_pair(t)).collect();

    let mut epoch_losses = Vec::with_capacity(train.epochs);
    let mut step = 0u64;
    for _epoch in 0..train.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss_sum = 0.0;
        let mut epoch_tokens = 0usize;
        for chunk in order.chunks(train.batch_size.max(1)) {
            let results: Vec<(Seq2Seq, f64, usize)> = chunk
                .par_iter()
                .enumerate()
                .map(|(slot, &idx)| {
                    let (frames, _) = &dataset[idx];
                    let (dec_in, target) = &pairs[idx];
                    let mut grads = zeros_like(&model);
                    let mut drop_rng = ChaCha8Rng::seed_from_u64(derive_seed(
                        seed,
                        0x5E15 ^ (step << 8) ^ slot as u64,
                    ));
                    let rng_opt = if cfg.dropout > 0.0 { Some(&mut drop_rng) } else { None };
                    let (logits, cache) = model
                        .forward(&frames.frames, &frames.pad_mask, dec_in, rng_opt)
                        .expect("validated dataset");
                    let (loss, count, grad) = cross_entropy(&logits, target);
                    model.backward(&cache, &grad, &mut grads);
                    (grads, loss, count)
                })
                .collect();
            let mut grads = zeros_like(&model);
            let mut loss_sum = 0.0;
            let mut token_count = 0usize;
            for (g, l, c) in &results {
                add_grads(&mut grads, g);
                loss_sum += l;
                token_count += c;
            }
            // Mean over non-pad target positions in the batch.
            let scale = 1.0 / token_count.max(1) as f64;
            for g in grads.params_mut() {
                g.scale(scale);
            }
            adam.step(&mut model, &mut grads);
            epoch_loss_sum += loss_sum;
            epoch_tokens += token_count;
            step += 1;
        }
        epoch_losses.push(epoch_loss_sum / epoch_tokens.max(1) as f64);
    }
    Ok((model, epoch_losses))
}

/// Pad a batch of frame sequences to a common length; padded rows carry
/// `pad_mask = false` and zero frames.
pub fn pad_batch(items: &[FrameSequence]) -> Vec<FrameSequence> {
    let max_t = items.iter().map(|f| f.frames.rows).max().unwrap_or(0);
    items
        .iter()
        .map(|f| {
            let mut frames = Mat::zeros(max_t, f.frames.cols);
            for r in 0..f.frames.rows {
                frames.row_mut(r).copy_from_slice(f.frames.row(r));
            }
            let mut pad_mask = vec![false; max_t];
            pad_mask[..f.frames.rows].copy_from_slice(&f.pad_mask);
            FrameSequence { frames, pad_mask }
        })
        .collect()
}
