//! Subword lexicon built by iterative pair merging.
//!
//! Words start as character sequences with an end-of-word marker fused to
//! the final character (`love` -> `l o v e</w>`). The most frequent
//! adjacent symbol pair is merged repeatedly until the lexicon reaches its
//! size budget or the best pair occurs only once. Tokenization replays the
//! stored merge list in order, so any word over the base alphabet is
//! tokenizable without rebuilding.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const END_OF_WORD: &str = "</w>";

/// Reserved special-token ids.
pub const PAD_ID: u32 = 0;
pub const BOS_ID: u32 = 1;
pub const EOS_ID: u32 = 2;
pub const SPECIALS: [&str; 3] = ["<pad>", "<bos>", "<eos>"];

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("max_size {max_size} below alphabet size {alphabet} (plus {specials} specials)")]
    MaxSizeTooSmall { max_size: usize, alphabet: usize, specials: usize },
    #[error("word '{word}' contains character '{ch}' outside the base alphabet")]
    Untokenizable { word: String, ch: char },
    #[error("invalid token id {0}")]
    InvalidId(u32),
    #[error("malformed lexicon file: {0}")]
    Malformed(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Ordered subword inventory plus the merge list that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lexicon {
    pub symbols: Vec<String>,
    pub merges: Vec<(String, String)>,
    pub max_size: usize,
    pub lowercase: bool,
    #[serde(skip)]
    ids: HashMap<String, u32>,
}

/// Token-id sequence ending with `<eos>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
}

#[derive(Debug, Clone, Copy)]
pub struct LexiconOptions {
    pub max_size: usize,
    pub lowercase: bool,
}

impl Default for LexiconOptions {
    fn default() -> Self {
        Self { max_size: 1000, lowercase: true }
    }
}

fn word_symbols(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let last = chars.len() - 1;
    chars
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if i == last {
                format!("{c}{END_OF_WORD}")
            } else {
                c.to_string()
            }
        })
        .collect()
}

fn merge_in_place(seq: &mut Vec<String>, left: &str, right: &str) {
    let mut i = 0;
    while i + 1 < seq.len() {
        if seq[i] == left && seq[i + 1] == right {
            let fused = format!("{}{}", seq[i], seq[i + 1]);
            seq[i] = fused;
            seq.remove(i + 1);
        }
        i += 1;
    }
}

/// Build a lexicon and also return the corpus token count after each merge
/// (starting with the unmerged count).
pub fn build_lexicon_traced(
    word_freqs: &BTreeMap<String, u64>,
    opts: LexiconOptions,
) -> Result<(Lexicon, Vec<u64>), LexiconError> {
    if word_freqs.is_empty() {
        return Err(LexiconError::EmptyCorpus);
    }
    let mut words: Vec<(Vec<String>, u64)> = word_freqs
        .iter()
        .filter(|(w, _)| !w.is_empty())
        .map(|(w, &f)| {
            let w = if opts.lowercase { w.to_lowercase() } else { w.clone() };
            (word_symbols(&w), f)
        })
        .collect();
    if words.is_empty() {
        return Err(LexiconError::EmptyCorpus);
    }

    // Base alphabet: both plain and word-final forms of every character, so
    // unseen words over the same characters stay tokenizable.
    let mut alphabet = BTreeSet::new();
    for (seq, _) in &words {
        for sym in seq {
            let ch = sym.trim_end_matches(END_OF_WORD);
            alphabet.insert(ch.to_string());
            alphabet.insert(format!("{ch}{END_OF_WORD}"));
        }
    }

    let mut symbols: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
    symbols.extend(alphabet.iter().cloned());
    if opts.max_size < symbols.len() {
        return Err(LexiconError::MaxSizeTooSmall {
            max_size: opts.max_size,
            alphabet: alphabet.len(),
            specials: SPECIALS.len(),
        });
    }

    let token_count =
        |words: &[(Vec<String>, u64)]| words.iter().map(|(s, f)| s.len() as u64 * f).sum::<u64>();
    let mut counts_trace = vec![token_count(&words)];
    let mut merges = Vec::new();

    while symbols.len() < opts.max_size {
        // Global adjacent-pair counts; BTreeMap iteration makes the
        // lexicographically smallest pair win ties.
        let mut pair_counts: BTreeMap<(String, String), u64> = BTreeMap::new();
        for (seq, freq) in &words {
            for win in seq.windows(2) {
                *pair_counts.entry((win[0].clone(), win[1].clone())).or_insert(0) += freq;
            }
        }
        let best = pair_counts
            .iter()
            .fold(None::<(&(String, String), u64)>, |acc, (pair, &count)| match acc {
                Some((_, c)) if c >= count => acc,
                _ => Some((pair, count)),
            });
        let Some((pair, count)) = best else { break };
        if count < 2 {
            break;
        }
        let (left, right) = pair.clone();
        for (seq, _) in &mut words {
            merge_in_place(seq, &left, &right);
        }
        symbols.push(format!("{left}{right}"));
        merges.push((left, right));
        counts_trace.push(token_count(&words));
    }

    let mut lex = Lexicon {
        symbols,
        merges,
        max_size: opts.max_size,
        lowercase: opts.lowercase,
        ids: HashMap::new(),
    };
    lex.rebuild_index();
    Ok((lex, counts_trace))
}

pub fn build_lexicon(
    word_freqs: &BTreeMap<String, u64>,
    opts: LexiconOptions,
) -> Result<Lexicon, LexiconError> {
    build_lexicon_traced(word_freqs, opts).map(|(lex, _)| lex)
}

/// Count words in whitespace-separated sentences.
pub fn word_frequencies(sentences: &[String], lowercase: bool) -> BTreeMap<String, u64> {
    let mut freqs = BTreeMap::new();
    for s in sentences {
        for w in s.split_whitespace() {
            let w = if lowercase { w.to_lowercase() } else { w.to_string() };
            *freqs.entry(w).or_insert(0) += 1;
        }
    }
    freqs
}

impl Lexicon {
    fn rebuild_index(&mut self) {
        self.ids = self
            .symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
    }

    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    pub fn id_of(&self, symbol: &str) -> Option<u32> {
        self.ids.get(symbol).copied()
    }

    pub fn symbol(&self, id: u32) -> Result<&str, LexiconError> {
        self.symbols
            .get(id as usize)
            .map(|s| s.as_str())
            .ok_or(LexiconError::InvalidId(id))
    }

    /// Canonical segmentation of one word: characters plus the end marker,
    /// then the merge list replayed in training order.
    pub fn segment_word(&self, word: &str) -> Result<Vec<String>, LexiconError> {
        let word = if self.lowercase { word.to_lowercase() } else { word.to_string() };
        for ch in word.chars() {
            if !self.ids.contains_key(&ch.to_string()) {
                return Err(LexiconError::Untokenizable { word: word.clone(), ch });
            }
        }
        let mut seq = word_symbols(&word);
        for (left, right) in &self.merges {
            merge_in_place(&mut seq, left, right);
        }
        Ok(seq)
    }

    /// Tokenize a sentence and append `<eos>`.
    pub fn tokenize(&self, sentence: &str) -> Result<TokenSequence, LexiconError> {
        let mut ids = Vec::new();
        for word in sentence.split_whitespace() {
            for sym in self.segment_word(word)? {
                let id = self
                    .id_of(&sym)
                    .ok_or_else(|| LexiconError::Malformed(format!("symbol '{sym}' unindexed")))?;
                ids.push(id);
            }
        }
        ids.push(EOS_ID);
        Ok(TokenSequence { ids })
    }

    /// Invert a token sequence back to text. `<eos>` terminates; `<pad>`
    /// and `<bos>` are skipped.
    pub fn detokenize(&self, seq: &TokenSequence) -> Result<String, LexiconError> {
        let mut words = Vec::new();
        let mut current = String::new();
        for &id in &seq.ids {
            if id == EOS_ID {
                break;
            }
            if id == PAD_ID || id == BOS_ID {
                continue;
            }
            let sym = self.symbol(id)?;
            if let Some(stem) = sym.strip_suffix(END_OF_WORD) {
                current.push_str(stem);
                words.push(std::mem::take(&mut current));
            } else {
                current.push_str(sym);
            }
        }
        if !current.is_empty() {
            words.push(current);
        }
        Ok(words.join(" "))
    }

    /// Content ids only: specials stripped.
    pub fn content_ids(&self, seq: &TokenSequence) -> Vec<u32> {
        seq.ids
            .iter()
            .copied()
            .filter(|&id| id != PAD_ID && id != BOS_ID && id != EOS_ID)
            .collect()
    }

    /// Text format: header lines, the alphabet, then one merge pair per line.
    pub fn save(&self, path: &Path) -> Result<(), LexiconError> {
        let alphabet: Vec<&String> = self.symbols[SPECIALS.len()..]
            .iter()
            .take(self.symbols.len() - SPECIALS.len() - self.merges.len())
            .collect();
        let mut out = String::new();
        out.push_str("silentwave-lexicon 1\n");
        out.push_str(&format!("max_size {}\n", self.max_size));
        out.push_str(&format!("lowercase {}\n", self.lowercase));
        out.push_str(&format!("alphabet {}\n", alphabet.len()));
        for sym in alphabet {
            out.push_str(sym);
            out.push('\n');
        }
        out.push_str(&format!("merges {}\n", self.merges.len()));
        for (l, r) in &self.merges {
            out.push_str(&format!("{l} {r}\n"));
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| LexiconError::Malformed("empty file".into()))?;
        if header != "silentwave-lexicon 1" {
            return Err(LexiconError::Malformed(format!("bad header '{header}'")));
        }
        let mut expect = |key: &str| -> Result<String, LexiconError> {
            let line = lines
                .next()
                .ok_or_else(|| LexiconError::Malformed(format!("missing {key}")))?;
            line.strip_prefix(&format!("{key} "))
                .map(|v| v.to_string())
                .ok_or_else(|| LexiconError::Malformed(format!("expected '{key} ...'")))
        };
        let max_size: usize = expect("max_size")?
            .parse()
            .map_err(|_| LexiconError::Malformed("bad max_size".into()))?;
        let lowercase: bool = expect("lowercase")?
            .parse()
            .map_err(|_| LexiconError::Malformed("bad lowercase".into()))?;
        let n_alpha: usize = expect("alphabet")?
            .parse()
            .map_err(|_| LexiconError::Malformed("bad alphabet count".into()))?;
        let mut symbols: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        for _ in 0..n_alpha {
            let line = lines
                .next()
                .ok_or_else(|| LexiconError::Malformed("truncated alphabet".into()))?;
            symbols.push(line.to_string());
        }
        let n_merges: usize = {
            let line = lines
                .next()
                .ok_or_else(|| LexiconError::Malformed("missing merges".into()))?;
            line.strip_prefix("merges ")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| LexiconError::Malformed("bad merges count".into()))?
        };
        let mut merges = Vec::with_capacity(n_merges);
        for _ in 0..n_merges {
            let line = lines
                .next()
                .ok_or_else(|| LexiconError::Malformed("truncated merges".into()))?;
            let (l, r) = line
                .split_once(' ')
                .ok_or_else(|| LexiconError::Malformed(format!("bad merge line '{line}'")))?;
            symbols.push(format!("{l}{r}"));
            merges.push((l.to_string(), r.to_string()));
        }
        let mut lex = Lexicon { symbols, merges, max_size, lowercase, ids: HashMap::new() };
        lex.rebuild_index();
        Ok(lex)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn freqs(pairs: &[(&str, u64)]) -> BTreeMap<String, u64> {
        pairs.iter().map(|(w, f)| (w.to_string(), *f)).collect()
    }

    /// Count every adjacent pair of the current corpus representation the
    /// slow way; used as the oracle for merge selection.
    fn brute_force_best_pair(
        words: &[(Vec<String>, u64)],
    ) -> Option<((String, String), u64)> {
        let mut counts: BTreeMap<(String, String), u64> = BTreeMap::new();
        for (seq, f) in words {
            for w in seq.windows(2) {
                *counts.entry((w[0].clone(), w[1].clone())).or_insert(0) += f;
            }
        }
        counts
            .into_iter()
            .fold(None, |acc: Option<((String, String), u64)>, (p, c)| match acc {
                Some((_, bc)) if bc >= c => acc,
                _ => Some((p, c)),
            })
    }

    #[test]
    fn single_pair_corpus() {
        let lex = build_lexicon(
            &freqs(&[("ab", 1)]),
            LexiconOptions { max_size: 50, lowercase: true },
        )
        .unwrap();
        // One word with frequency 1: best pair frequency is 1, so no merges.
        assert!(lex.merges.is_empty());
        let lex = build_lexicon(
            &freqs(&[("ab", 2)]),
            LexiconOptions { max_size: 50, lowercase: true },
        )
        .unwrap();
        assert_eq!(lex.merges[0], ("a".to_string(), format!("b{END_OF_WORD}")));
    }

    #[test]
    fn classic_corpus_first_merge() {
        let f = freqs(&[("low", 5), ("lower", 2), ("newest", 6), ("widest", 3)]);
        let words: Vec<(Vec<String>, u64)> = f
            .iter()
            .map(|(w, &c)| (super::word_symbols(w), c))
            .collect();
        let oracle = brute_force_best_pair(&words).unwrap();
        // (e, s) appears in newest (6) and widest (3): count 9.
        assert_eq!(oracle, (("e".to_string(), "s".to_string()), 9));
        let (lex, trace) =
            build_lexicon_traced(&f, LexiconOptions { max_size: 200, lowercase: true }).unwrap();
        assert_eq!(lex.merges[0], ("e".to_string(), "s".to_string()));
        // Token count falls by the merged pair count at each step.
        for w in trace.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn terminates_and_respects_max_size() {
        let f = freqs(&[("aaaa", 10), ("aaab", 7), ("abab", 4)]);
        let lex =
            build_lexicon(&f, LexiconOptions { max_size: 12, lowercase: true }).unwrap();
        assert!(lex.size() <= 12);
    }

    #[test]
    fn whole_word_token() {
        let f = freqs(&[("go", 9), ("stop", 4)]);
        let lex = build_lexicon(&f, LexiconOptions { max_size: 100, lowercase: true }).unwrap();
        let seq = lex.tokenize("go").unwrap();
        // go merges into a single symbol (frequency 9 >= 2).
        assert_eq!(seq.ids.len(), 2); // go</w>, <eos>
        assert_eq!(*seq.ids.last().unwrap(), EOS_ID);
        assert_eq!(lex.detokenize(&seq).unwrap(), "go");
    }

    #[test]
    fn looks_decomposes_into_stem_and_suffix() {
        // look appears often; looks only once, so it must reuse the stem.
        let f = freqs(&[("look", 12), ("looking", 5), ("looked", 4), ("looks", 1), ("s", 3)]);
        let lex = build_lexicon(&f, LexiconOptions { max_size: 300, lowercase: true }).unwrap();
        let seg = lex.segment_word("looks").unwrap();
        assert!(seg.len() >= 2, "expected stem+suffix, got {seg:?}");
        assert!(seg[0].starts_with('l'));
        assert_eq!(seg.last().unwrap().as_str(), &format!("s{END_OF_WORD}"));
        let seq = lex.tokenize("looks").unwrap();
        assert_eq!(lex.detokenize(&seq).unwrap(), "looks");
    }

    #[test]
    fn unseen_in_alphabet_word_tokenizes() {
        let f = freqs(&[("cat", 5), ("dog", 5)]);
        let lex = build_lexicon(&f, LexiconOptions { max_size: 100, lowercase: true }).unwrap();
        // "taco" was never seen but uses only known characters... 'o' mid-word
        // and 'c' word-final exercise both alphabet forms.
        let seq = lex.tokenize("tag doc").unwrap();
        assert_eq!(lex.detokenize(&seq).unwrap(), "tag doc");
    }

    #[test]
    fn out_of_alphabet_character_errors() {
        let f = freqs(&[("cat", 5)]);
        let lex = build_lexicon(&f, LexiconOptions { max_size: 100, lowercase: true }).unwrap();
        match lex.tokenize("cat zap") {
            Err(LexiconError::Untokenizable { word, ch }) => {
                assert_eq!(word, "zap");
                assert_eq!(ch, 'z');
            }
            other => panic!("expected untokenizable, got {other:?}"),
        }
    }

    #[test]
    fn detokenize_edge_cases() {
        let f = freqs(&[("hi", 3), ("there", 3)]);
        let lex = build_lexicon(&f, LexiconOptions { max_size: 100, lowercase: true }).unwrap();
        assert_eq!(lex.detokenize(&TokenSequence { ids: vec![EOS_ID] }).unwrap(), "");
        let seq = lex.tokenize("hi there").unwrap();
        assert_eq!(lex.detokenize(&seq).unwrap(), "hi there");
        assert!(lex.detokenize(&TokenSequence { ids: vec![9999] }).is_err());
    }

    #[test]
    fn max_size_below_alphabet_rejected() {
        let f = freqs(&[("abcdef", 2)]);
        assert!(matches!(
            build_lexicon(&f, LexiconOptions { max_size: 4, lowercase: true }),
            Err(LexiconError::MaxSizeTooSmall { .. })
        ));
    }

    #[test]
    fn deterministic_build_and_roundtrip_file() {
        let f = freqs(&[("alpha", 4), ("beta", 3), ("gamma", 2), ("delta", 5)]);
        let opts = LexiconOptions { max_size: 60, lowercase: true };
        let a = build_lexicon(&f, opts).unwrap();
        let b = build_lexicon(&f, opts).unwrap();
        assert_eq!(a.symbols, b.symbols);
        assert_eq!(a.merges, b.merges);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lex.txt");
        a.save(&path).unwrap();
        let c = Lexicon::load(&path).unwrap();
        assert_eq!(a.symbols, c.symbols);
        assert_eq!(a.merges, c.merges);
        assert_eq!(a.max_size, c.max_size);
    }

    #[test]
    fn roundtrip_training_words() {
        let f = freqs(&[("we", 6), ("need", 4), ("more", 4), ("time", 3), ("now", 7)]);
        let lex = build_lexicon(&f, LexiconOptions { max_size: 80, lowercase: true }).unwrap();
        for word in f.keys() {
            let seq = lex.tokenize(word).unwrap();
            assert_eq!(&lex.detokenize(&seq).unwrap(), word, "round trip failed for {word}");
        }
    }
}
