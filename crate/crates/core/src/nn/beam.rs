//! Beam-search decoding over the subword vocabulary.

use super::model::Seq2Seq;
use super::{FrameSequence, NnError};
use crate::lexicon::{TokenSequence, BOS_ID, EOS_ID, PAD_ID};

/// One partial hypothesis: emitted tokens (no BOS), cumulative
/// log-probability, and whether EOS has been produced.
#[derive(Debug, Clone)]
pub struct BeamHypothesis {
    pub tokens: Vec<u32>,
    pub logprob: f64,
    pub finished: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct BeamConfig {
    pub width: usize,
    pub max_len: usize,
    /// Optional length normalization: final score = logprob / len^alpha.
    pub length_penalty: Option<f64>,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self { width: 4, max_len: 32, length_penalty: None }
    }
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    logits.iter().map(|v| v - max - log_sum).collect()
}

fn final_score(h: &BeamHypothesis, length_penalty: Option<f64>) -> f64 {
    match length_penalty {
        Some(alpha) => h.logprob / (h.tokens.len().max(1) as f64).powf(alpha),
        None => h.logprob,
    }
}

/// Keep the top-k hypotheses by cumulative log-probability, expanding each
/// with every candidate token (everything except `<pad>` and `<bos>`).
/// Finished hypotheses move to a completed set; decoding stops when all
/// beams have finished or `max_len` is reached. Ties break toward the
/// lexicographically smaller token sequence, so decoding is deterministic.
pub fn beam_search(
    model: &Seq2Seq,
    frames: &FrameSequence,
    cfg: BeamConfig,
) -> Result<(TokenSequence, f64), NnError> {
    if cfg.width == 0 {
        return Err(NnError::InvalidConfig("beam width must be >= 1".into()));
    }
    let enc_h = model.encode(&frames.frames, &frames.pad_mask)?;
    let candidates: Vec<u32> = (0..model.cfg.vocab_size as u32)
        .filter(|&t| t != PAD_ID && t != BOS_ID)
        .collect();

    let mut live = vec![BeamHypothesis { tokens: Vec::new(), logprob: 0.0, finished: false }];
    let mut completed: Vec<BeamHypothesis> = Vec::new();

    for _step in 0..cfg.max_len {
        if live.is_empty() {
            break;
        }
        let mut expansions: Vec<BeamHypothesis> = Vec::new();
        for hyp in &live {
            let mut prefix = Vec::with_capacity(hyp.tokens.len() + 1);
            prefix.push(BOS_ID);
            prefix.extend_from_slice(&hyp.tokens);
            let logits = model.next_token_logits(&enc_h, &frames.pad_mask, &prefix)?;
            let logprobs = log_softmax(&logits);
            for &tok in &candidates {
                let mut tokens = hyp.tokens.clone();
                tokens.push(tok);
                expansions.push(BeamHypothesis {
                    tokens,
                    logprob: hyp.logprob + logprobs[tok as usize],
                    finished: tok == EOS_ID,
                });
            }
        }
        expansions.sort_by(|a, b| {
            b.logprob
                .partial_cmp(&a.logprob)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.tokens.cmp(&b.tokens))
        });
        expansions.truncate(cfg.width);
        live = Vec::with_capacity(cfg.width);
        for hyp in expansions {
            if hyp.finished {
                completed.push(hyp);
            } else {
                live.push(hyp);
            }
        }
    }
    // Unfinished beams at max_len still compete on their scores.
    completed.extend(live);

    let best = completed
        .into_iter()
        .max_by(|a, b| {
            final_score(a, cfg.length_penalty)
                .partial_cmp(&final_score(b, cfg.length_penalty))
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| b.tokens.cmp(&a.tokens))
        })
        .expect("at least one hypothesis");
    let score = final_score(&best, cfg.length_penalty);
    let mut ids = best.tokens;
    if ids.last() != Some(&EOS_ID) {
        ids.push(EOS_ID);
    }
    Ok((TokenSequence { ids }, score))
}

/// Greedy decoding: the argmax token at each step (lowest id on ties).
pub fn greedy_decode(
    model: &Seq2Seq,
    frames: &FrameSequence,
    max_len: usize,
) -> Result<(TokenSequence, f64), NnError> {
    let enc_h = model.encode(&frames.frames, &frames.pad_mask)?;
    let mut tokens: Vec<u32> = Vec::new();
    let mut logprob = 0.0;
    for _ in 0..max_len {
        let mut prefix = Vec::with_capacity(tokens.len() + 1);
        prefix.push(BOS_ID);
        prefix.extend_from_slice(&tokens);
        let logits = model.next_token_logits(&enc_h, &frames.pad_mask, &prefix)?;
        let logprobs = log_softmax(&logits);
        let mut best_tok = None;
        let mut best_lp = f64::NEG_INFINITY;
        for (tok, &lp) in logprobs.iter().enumerate() {
            let tok = tok as u32;
            if tok == PAD_ID || tok == BOS_ID {
                continue;
            }
            if lp > best_lp {
                best_lp = lp;
                best_tok = Some(tok);
            }
        }
        let tok = best_tok.expect("non-empty vocab");
        tokens.push(tok);
        logprob += best_lp;
        if tok == EOS_ID {
            break;
        }
    }
    if tokens.last() != Some(&EOS_ID) {
        tokens.push(EOS_ID);
    }
    Ok((TokenSequence { ids: tokens }, logprob))
}
