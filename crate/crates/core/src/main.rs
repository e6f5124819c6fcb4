//! `silentwave` command-line interface.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use silentwave::config::PipelineConfig;
use silentwave::eval::eval_corpus;
use silentwave::features::{
    apply_scaler, extract_features, fit_scaler, kmeans, KmeansOptions, MIN_SEGMENT_SAMPLES,
};
use silentwave::io;
use silentwave::isolate::{extract_motion_trace, MotionTrace};
use silentwave::lexicon::{build_lexicon, word_frequencies, Lexicon, LexiconOptions, TokenSequence};
use silentwave::nn::{beam_search, checkpoint, featurize_series, BeamConfig};
use silentwave::pipeline::{run_pipeline, Stage};
use silentwave::segment::segment_units;
use silentwave::signal::RealSeries;

#[derive(Parser)]
#[command(
    name = "silentwave",
    version,
    about = "Backscatter lip-motion sensing: simulation, isolation, segmentation, and lexicon-guided decoding"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// Pipeline configuration file (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config value by dotted path, e.g. --set train.epochs=40.
    #[arg(long = "set", value_parser = parse_kv, value_name = "KEY=VALUE")]
    set: Vec<(String, String)>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> anyhow_lite::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        cfg.apply_overrides(&self.set)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

fn parse_kv(raw: &str) -> std::result::Result<(String, String), String> {
    raw.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected KEY=VALUE, got '{raw}'"))
}

/// Minimal error plumbing for the binary.
mod anyhow_lite {
    pub type Error = Box<dyn std::error::Error + Send + Sync>;
    pub type Result<T> = std::result::Result<T, Error>;
}
use anyhow_lite::Result;

#[derive(Subcommand)]
enum Command {
    /// Synthesize a labeled backscatter corpus from sentences.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Sentence file, one per line (otherwise generated from config).
        #[arg(long)]
        sentences: Option<PathBuf>,
        /// Output pipeline directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover a lip-motion trace from a raw IQ recording.
    Isolate {
        #[arg(long = "in")]
        input: PathBuf,
        /// Tag switching frequency override (Hz).
        #[arg(long = "delta-f1")]
        delta_f1: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Segment a trace into lip-motion units.
    Segment {
        #[arg(long = "in")]
        input: PathBuf,
        /// Segmenter parameter file (TOML pipeline config).
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Extract 67-dim unit features into a binary table.
    Features {
        /// Trace file.
        #[arg(long)]
        trace: PathBuf,
        /// Segments file (JSONL rows {start_s, end_s}).
        #[arg(long)]
        segments: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit k-means on a feature table.
    Cluster {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value_t = 32)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build or use a subword lexicon.
    Lexicon {
        #[command(subcommand)]
        action: LexiconCmd,
    },
    /// Run cluster-pseudo-label pretraining (pipeline stage).
    Pretrain {
        #[command(flatten)]
        config: ConfigArgs,
        /// Pipeline directory with upstream stage outputs.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the sequence model (pipeline stage).
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Beam-decode a trace with a trained model.
    Decode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        lexicon: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 4)]
        beam: usize,
        #[arg(long = "max-len", default_value_t = 24)]
        max_len: usize,
        /// Optional length-normalization exponent.
        #[arg(long = "length-penalty")]
        length_penalty: Option<f64>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Score hypotheses against references (line-aligned text files).
    Eval {
        #[arg(long)]
        refs: PathBuf,
        #[arg(long)]
        hyps: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the cached end-to-end pipeline.
    Pipeline {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        /// First stage to run (earlier stages must be cached).
        #[arg(long)]
        from: Option<String>,
        /// Last stage to run.
        #[arg(long)]
        to: Option<String>,
    },
}

#[derive(Subcommand)]
enum LexiconCmd {
    /// Build merges from a sentence corpus (one sentence per line).
    Build {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long = "max-size", default_value_t = 1000)]
        max_size: usize,
        #[arg(long, default_value_t = true)]
        lowercase: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tokenize text to ids.
    Encode {
        #[arg(long)]
        lexicon: PathBuf,
        text: String,
    },
    /// Detokenize space-separated ids back to text.
    Decode {
        #[arg(long)]
        lexicon: PathBuf,
        ids: String,
    },
}

fn load_trace_file(path: &PathBuf) -> Result<MotionTrace> {
    Ok(io::read_trace(path)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, sentences, out } => {
            let mut cfg = config.load()?;
            if let Some(path) = sentences {
                cfg.sentences.file = Some(path);
            }
            let report = run_pipeline(&cfg, &out, None, Some(Stage::Simulate))?;
            for s in &report.stages {
                println!("{:<10} {}", s.stage, if s.cached { "cached" } else { "ran" });
            }
            println!("corpus written to {}", out.join("simulate").display());
        }
        Command::Isolate { input, delta_f1, out, config } => {
            let cfg = config.load()?;
            let mut params = cfg.isolation.clone();
            if let Some(f) = delta_f1 {
                params.delta_f1_hz = f;
            }
            let iq = io::read_iq(&input)?;
            let (trace, gate) = extract_motion_trace(&iq, &params)?;
            io::write_trace(&out, &trace)?;
            println!(
                "trace: {} samples at {} Hz, {} gated window(s), {} zero-magnitude sample(s)",
                trace.values.len(),
                trace.values.sample_rate_hz,
                gate.discarded.len(),
                trace.provenance.zero_magnitude_samples
            );
            if trace.provenance.no_articulation {
                println!("note: no VMD mode fell in the lip-motion band (no articulation detected)");
            }
        }
        Command::Segment { input, params, out, mut config } => {
            if config.config.is_none() {
                config.config = params;
            }
            let cfg = config.load()?;
            let trace = load_trace_file(&input)?;
            let result = segment_units(&trace, &cfg.segmenter)?;
            let mut lines = String::new();
            for seg in &result.segments {
                lines.push_str(&serde_json::json!({"start_s": seg.start_s, "end_s": seg.end_s}).to_string());
                lines.push('\n');
            }
            std::fs::write(&out, lines)?;
            println!(
                "{} segment(s){}",
                result.segments.len(),
                if result.used_global_baseline { " (global-mean baseline fallback)" } else { "" }
            );
        }
        Command::Features { trace, segments, out } => {
            let trace = load_trace_file(&trace)?;
            let rate = trace.values.sample_rate_hz;
            let text = std::fs::read_to_string(&segments)?;
            let mut rows = Vec::new();
            let mut vectors = Vec::new();
            let mut skipped = 0usize;
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                let row: serde_json::Value = serde_json::from_str(line)?;
                let start_s = row["start_s"].as_f64().ok_or("missing start_s")?;
                let end_s = row["end_s"].as_f64().ok_or("missing end_s")?;
                let a = (start_s * rate).round() as usize;
                let b = ((end_s * rate).round() as usize).min(trace.values.len());
                let seg = silentwave::segment::UnitSegment {
                    start_s,
                    end_s,
                    values: RealSeries::new(trace.values.values[a..b].to_vec(), rate),
                    source_utterance: String::new(),
                };
                if seg.values.len() < MIN_SEGMENT_SAMPLES {
                    skipped += 1;
                    continue;
                }
                vectors.push(extract_features(&seg)?);
                rows.push(serde_json::json!({"start_s": start_s, "end_s": end_s}));
            }
            if vectors.len() >= 2 {
                let scaler = fit_scaler(&vectors)?;
                let scaled: std::result::Result<Vec<_>, _> =
                    vectors.iter().map(|v| apply_scaler(&scaler, v)).collect();
                io::write_feature_table(&out, &scaled?, Some(serde_json::json!(rows)))?;
            } else {
                io::write_feature_table(&out, &vectors, Some(serde_json::json!(rows)))?;
            }
            println!("{} feature row(s), {} segment(s) too short", vectors.len(), skipped);
        }
        Command::Cluster { features, k, seed, out } => {
            let table = io::read_feature_table(&features)?;
            let fit = kmeans(&table, k, seed, KmeansOptions::default())?;
            std::fs::write(&out, serde_json::to_string_pretty(&fit.model)?)?;
            println!("k = {} inertia = {:.6}", fit.model.k, fit.model.inertia);
        }
        Command::Lexicon { action } => match action {
            LexiconCmd::Build { corpus, max_size, lowercase, out } => {
                let text = std::fs::read_to_string(&corpus)?;
                let sentences: Vec<String> = text.lines().map(|l| l.to_string()).collect();
                let freqs = word_frequencies(&sentences, lowercase);
                let lex = build_lexicon(&freqs, LexiconOptions { max_size, lowercase })?;
                lex.save(&out)?;
                println!("{} symbols, {} merges", lex.size(), lex.merges.len());
            }
            LexiconCmd::Encode { lexicon, text } => {
                let lex = Lexicon::load(&lexicon)?;
                let seq = lex.tokenize(&text)?;
                let ids: Vec<String> = seq.ids.iter().map(|i| i.to_string()).collect();
                println!("{}", ids.join(" "));
            }
            LexiconCmd::Decode { lexicon, ids } => {
                let lex = Lexicon::load(&lexicon)?;
                let parsed: std::result::Result<Vec<u32>, _> =
                    ids.split_whitespace().map(|t| t.parse::<u32>()).collect();
                let seq = TokenSequence { ids: parsed? };
                println!("{}", lex.detokenize(&seq)?);
            }
        },
        Command::Pretrain { config, out } => {
            let cfg = config.load()?;
            run_pipeline(&cfg, &out, Some(Stage::Pretrain), Some(Stage::Pretrain))?;
            println!("pretrained encoder at {}", out.join("pretrain/pretrain.swck").display());
        }
        Command::Train { config, out } => {
            let cfg = config.load()?;
            run_pipeline(&cfg, &out, Some(Stage::Train), Some(Stage::Train))?;
            println!("model at {}", out.join("train/model.swck").display());
        }
        Command::Decode { model, lexicon, input, beam, max_len, length_penalty, config } => {
            let cfg = config.load()?;
            let model = checkpoint::load_seq2seq(&model)?;
            let lex = Lexicon::load(&lexicon)?;
            let trace = load_trace_file(&input)?;
            let frames = featurize_series(&trace.values, &cfg.frontend)?;
            let (tokens, score) = beam_search(
                &model,
                &frames,
                BeamConfig { width: beam, max_len, length_penalty },
            )?;
            println!("{}", lex.detokenize(&tokens)?);
            eprintln!("score: {score:.4}");
        }
        Command::Eval { refs, hyps, out } => {
            let read_lines = |p: &PathBuf| -> Result<Vec<String>> {
                Ok(std::fs::read_to_string(p)?
                    .lines()
                    .map(|l| l.to_string())
                    .filter(|l| !l.is_empty())
                    .collect())
            };
            let refs = read_lines(&refs)?;
            let hyps = read_lines(&hyps)?;
            let result = eval_corpus(&refs, &hyps)?;
            println!(
                "WER {:.4}  accuracy {:.4}  (C {} S {} D {} I {})",
                result.aggregate.wer,
                result.aggregate.word_accuracy,
                result.aggregate.correct,
                result.aggregate.substitutions,
                result.aggregate.deletions,
                result.aggregate.insertions,
            );
            if let Some(path) = out {
                std::fs::write(&path, serde_json::to_string_pretty(&result)?)?;
            }
        }
        Command::Pipeline { config, out, from, to } => {
            let cfg = config.load()?;
            let from = from.map(|s| Stage::parse(&s)).transpose()?;
            let to = to.map(|s| Stage::parse(&s)).transpose()?;
            let report = run_pipeline(&cfg, &out, from, to)?;
            for s in &report.stages {
                println!(
                    "{:<10} {:<7} {} ms",
                    s.stage,
                    if s.cached { "cached" } else { "ran" },
                    s.wall_ms
                );
            }
            if let Some(m) = &report.metrics {
                println!(
                    "test {} utt | mean sentence WER {:.4} | WER {:.4} | accuracy {:.4}",
                    m.n_test, m.mean_sentence_wer, m.aggregate.wer, m.aggregate.word_accuracy
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
