//! Word error rate and word accuracy.
//!
//! Scoring normalizes text to lowercase words (punctuation stripped), then
//! aligns reference and hypothesis at the word level by dynamic
//! programming with unit costs. When several alignments are optimal the
//! backtrace prefers substitution, then deletion, then insertion, so the
//! reported count breakdown is deterministic (the WER value itself is
//! tie-invariant).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty reference (WER denominator would be zero)")]
    EmptyReference,
    #[error("reference/hypothesis count mismatch: {refs} vs {hyps}")]
    LengthMismatch { refs: usize, hyps: usize },
}

/// Alignment counts and derived metrics for one reference/hypothesis pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub wer: f64,
    pub word_accuracy: f64,
    pub correct: usize,
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
}

impl EvalResult {
    fn from_counts(nc: usize, ns: usize, nd: usize, ni: usize) -> Self {
        let denom = (ns + nd + nc) as f64;
        Self {
            wer: (ns + nd + ni) as f64 / denom,
            word_accuracy: nc as f64 / denom,
            correct: nc,
            substitutions: ns,
            deletions: nd,
            insertions: ni,
        }
    }
}

/// Lowercase and split into words; non-alphanumeric characters (except
/// apostrophes) become separators.
pub fn normalize_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() || c == '\'' {
            current.extend(c.to_lowercase());
        } else if !current.is_empty() {
            out.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

fn align(r: &[String], h: &[String]) -> EvalResult {
    let (m, n) = (r.len(), h.len());
    let mut dp = vec![vec![0u32; n + 1]; m + 1];
    for (i, row) in dp.iter_mut().enumerate() {
        row[0] = i as u32;
    }
    for j in 0..=n {
        dp[0][j] = j as u32;
    }
    for i in 1..=m {
        for j in 1..=n {
            let sub = dp[i - 1][j - 1] + u32::from(r[i - 1] != h[j - 1]);
            let del = dp[i - 1][j] + 1;
            let ins = dp[i][j - 1] + 1;
            dp[i][j] = sub.min(del).min(ins);
        }
    }
    // Backtrace with the fixed tie order: match, substitution, deletion,
    // insertion.
    let (mut i, mut j) = (m, n);
    let (mut nc, mut ns, mut nd, mut ni) = (0usize, 0usize, 0usize, 0usize);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 && r[i - 1] == h[j - 1] && dp[i][j] == dp[i - 1][j - 1] {
            nc += 1;
            i -= 1;
            j -= 1;
        } else if i > 0 && j > 0 && dp[i][j] == dp[i - 1][j - 1] + 1 {
            ns += 1;
            i -= 1;
            j -= 1;
        } else if i > 0 && dp[i][j] == dp[i - 1][j] + 1 {
            nd += 1;
            i -= 1;
        } else {
            ni += 1;
            j -= 1;
        }
    }
    EvalResult::from_counts(nc, ns, nd, ni)
}

/// Minimal-edit word alignment; errors on an empty reference.
pub fn wer(reference: &str, hypothesis: &str) -> Result<EvalResult, EvalError> {
    let r = normalize_words(reference);
    if r.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    let h = normalize_words(hypothesis);
    Ok(align(&r, &h))
}

/// Correct words over reference length, from the same alignment as [`wer`].
pub fn word_accuracy(reference: &str, hypothesis: &str) -> Result<f64, EvalError> {
    wer(reference, hypothesis).map(|r| r.word_accuracy)
}

/// Corpus-level scores: order-independent summed counts plus the mean of
/// per-sentence WERs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusEval {
    pub per_sentence: Vec<EvalResult>,
    pub aggregate: EvalResult,
    pub mean_sentence_wer: f64,
}

pub fn eval_corpus(references: &[String], hypotheses: &[String]) -> Result<CorpusEval, EvalError> {
    if references.len() != hypotheses.len() {
        return Err(EvalError::LengthMismatch { refs: references.len(), hyps: hypotheses.len() });
    }
    let mut per_sentence = Vec::with_capacity(references.len());
    let (mut nc, mut ns, mut nd, mut ni) = (0, 0, 0, 0);
    for (r, h) in references.iter().zip(hypotheses) {
        let e = wer(r, h)?;
        nc += e.correct;
        ns += e.substitutions;
        nd += e.deletions;
        ni += e.insertions;
        per_sentence.push(e);
    }
    let aggregate = EvalResult::from_counts(nc, ns, nd, ni);
    let mean_sentence_wer =
        per_sentence.iter().map(|e| e.wer).sum::<f64>() / per_sentence.len().max(1) as f64;
    Ok(CorpusEval { per_sentence, aggregate, mean_sentence_wer })
}
