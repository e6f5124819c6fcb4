//! Layered pipeline configuration: built-in defaults, a TOML file, then
//! dotted-path CLI overrides (`--set train.epochs=40`).

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::isolate::IsolationParams;
use crate::nn::{AdamConfig, FrontendConfig, ModelConfig, TrainConfig};
use crate::segment::SegmenterParams;
use crate::sim::{derive_seed, SceneConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io error reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("override '{key}': {reason}")]
    BadOverride { key: String, reason: String },
}

/// Sentence source: an explicit file (one sentence per line) or sentences
/// generated from a word list with seeded lengths.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SentencesConfig {
    pub file: Option<PathBuf>,
    pub words: Vec<String>,
    pub count: usize,
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for SentencesConfig {
    fn default() -> Self {
        Self {
            file: None,
            words: [
                "turn", "on", "off", "the", "light", "set", "alarm", "for", "eight", "play",
                "music", "stop", "open", "door", "close", "window", "call", "home", "send",
                "message", "what", "time", "is", "it", "weather", "today", "volume", "up",
                "down", "thanks",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            count: 50,
            min_len: 3,
            max_len: 6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct LexiconSection {
    pub max_size: usize,
    pub lowercase: bool,
}

impl Default for LexiconSection {
    fn default() -> Self {
        Self { max_size: 160, lowercase: true }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusSection {
    pub n_per_sentence: usize,
    pub inter_unit_gap_s: f64,
    /// Fraction of utterances held out for testing.
    pub holdout_fraction: f64,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self { n_per_sentence: 3, inter_unit_gap_s: 0.4, holdout_fraction: 0.2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterSection {
    pub k: usize,
    pub max_iter: usize,
    pub n_init: usize,
}

impl Default for ClusterSection {
    fn default() -> Self {
        Self { k: 32, max_iter: 100, n_init: 16 }
    }
}

/// Model preset plus optional field overrides. Vocabulary size and input
/// width are derived from the lexicon and frontend at build time.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSection {
    /// "toy" or "paper".
    pub preset: String,
    pub dropout: Option<f64>,
    pub embed_dim: Option<usize>,
    pub enc_layers: Option<usize>,
    pub enc_heads: Option<usize>,
    pub dec_layers: Option<usize>,
    pub dec_heads: Option<usize>,
    pub ff_dim: Option<usize>,
    pub max_frames: Option<usize>,
    pub max_tokens: Option<usize>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            preset: "toy".into(),
            dropout: None,
            embed_dim: None,
            enc_layers: None,
            enc_heads: None,
            dec_layers: None,
            dec_heads: None,
            ff_dim: None,
            max_frames: None,
            max_tokens: None,
        }
    }
}

impl ModelSection {
    pub fn to_model_config(&self, vocab_size: usize, input_dim: usize) -> Result<ModelConfig, ConfigError> {
        let mut cfg = match self.preset.as_str() {
            "toy" => ModelConfig::toy(vocab_size, input_dim),
            "paper" => ModelConfig::paper_scale(vocab_size, input_dim),
            other => {
                return Err(ConfigError::Parse(format!(
                    "unknown model preset '{other}' (expected toy|paper)"
                )))
            }
        };
        if let Some(v) = self.dropout {
            cfg.dropout = v;
        }
        if let Some(v) = self.embed_dim {
            cfg.embed_dim = v;
        }
        if let Some(v) = self.enc_layers {
            cfg.enc_layers = v;
        }
        if let Some(v) = self.enc_heads {
            cfg.enc_heads = v;
        }
        if let Some(v) = self.dec_layers {
            cfg.dec_layers = v;
        }
        if let Some(v) = self.dec_heads {
            cfg.dec_heads = v;
        }
        if let Some(v) = self.ff_dim {
            cfg.ff_dim = v;
        }
        if let Some(v) = self.max_frames {
            cfg.max_frames = v;
        }
        if let Some(v) = self.max_tokens {
            cfg.max_tokens = v;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub warmup_steps: usize,
    pub grad_clip: Option<f64>,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self { epochs: 30, batch_size: 8, lr: 3e-4, warmup_steps: 200, grad_clip: Some(1.0) }
    }
}

impl TrainSection {
    pub fn to_train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            adam: AdamConfig {
                lr: self.lr,
                warmup_steps: self.warmup_steps,
                grad_clip: self.grad_clip,
                ..AdamConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeSection {
    pub beam_width: usize,
    pub max_len: usize,
    pub length_penalty: Option<f64>,
}

impl Default for DecodeSection {
    fn default() -> Self {
        Self { beam_width: 4, max_len: 24, length_penalty: None }
    }
}

/// Everything the end-to-end pipeline needs, one section per stage.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    pub sentences: SentencesConfig,
    pub lexicon: LexiconSection,
    pub corpus: CorpusSection,
    pub scene: SceneConfig,
    pub isolation: IsolationParams,
    pub segmenter: SegmenterParams,
    pub clustering: ClusterSection,
    pub frontend: FrontendConfig,
    pub model: ModelSection,
    pub pretrain: TrainSection,
    pub train: TrainSection,
    pub decode: DecodeSection,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Apply `key=value` overrides with dotted paths into the TOML tree.
    pub fn apply_overrides(&mut self, overrides: &[(String, String)]) -> Result<(), ConfigError> {
        if overrides.is_empty() {
            return Ok(());
        }
        let mut tree: toml::Value = toml::Value::try_from(&*self)
            .map_err(|e| ConfigError::Parse(e.to_string()))?;
        for (key, raw) in overrides {
            let mut node = &mut tree;
            let parts: Vec<&str> = key.split('.').collect();
            for (i, part) in parts.iter().enumerate() {
                let table = node.as_table_mut().ok_or_else(|| ConfigError::BadOverride {
                    key: key.clone(),
                    reason: format!("'{}' is not a table", parts[..i].join(".")),
                })?;
                if i + 1 == parts.len() {
                    let value: toml::Value = raw
                        .parse::<toml::Value>()
                        .unwrap_or_else(|_| toml::Value::String(raw.clone()));
                    table.insert(part.to_string(), value);
                    break;
                }
                node = table.entry(part.to_string()).or_insert_with(|| {
                    toml::Value::Table(toml::map::Map::new())
                });
            }
        }
        *self = tree
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        Ok(())
    }

    /// The sentence corpus: read from the configured file, or generated
    /// deterministically from the word list and seed.
    pub fn resolve_sentences(&self) -> Result<Vec<String>, ConfigError> {
        if let Some(path) = &self.sentences.file {
            let text = std::fs::read_to_string(path)
                .map_err(|source| ConfigError::Io { path: path.clone(), source })?;
            return Ok(text
                .lines()
                .map(|l| l.trim().to_string())
                .filter(|l| !l.is_empty())
                .collect());
        }
        let s = &self.sentences;
        if s.words.is_empty() || s.min_len == 0 || s.max_len < s.min_len {
            return Err(ConfigError::Parse("invalid sentence generator settings".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, 0x53454E54));
        let mut sentences = Vec::with_capacity(s.count);
        for _ in 0..s.count {
            let len = rng.random_range(s.min_len..=s.max_len);
            let words: Vec<&str> = (0..len)
                .map(|_| s.words[rng.random_range(0..s.words.len())].as_str())
                .collect();
            sentences.push(words.join(" "));
        }
        Ok(sentences)
    }
}
