//! End-to-end orchestration with per-stage caching.
//!
//! Stages run in a fixed order, each writing its outputs plus a
//! `stage.json` marker holding a content hash of the stage's configuration
//! and its upstream hash. A rerun with an unchanged configuration hits
//! every cache; changing one section (say the beam width) invalidates only
//! the stages downstream of it.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::eval::{eval_corpus, EvalResult};
use crate::features::{
    apply_scaler, assign_pseudo_labels, extract_features, fit_scaler, kmeans, ClusterModel,
    KmeansOptions, MIN_SEGMENT_SAMPLES,
};
use crate::io;
use crate::isolate::{extract_motion_trace, MotionTrace};
use crate::lexicon::{build_lexicon, word_frequencies, Lexicon, LexiconOptions};
use crate::nn::{
    beam_search, checkpoint, featurize_series, pretrain_units, train_seq2seq, BeamConfig,
    FrameSequence,
};
use crate::segment::{segment_units, UnitSegment};
use crate::signal::RealSeries;
use crate::sim::{derive_seed, generate_corpus, CorpusManifest, CorpusParams, MotifBank};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("stage {stage}: {message}")]
    Stage { stage: &'static str, message: String },
    #[error("stage {stage} is stale (config changed upstream of the requested range); rerun it")]
    StaleCache { stage: &'static str },
    #[error("unknown stage '{0}'")]
    UnknownStage(String),
    #[error("config error: {0}")]
    Config(String),
}

macro_rules! stage_error {
    ($stage:expr) => {
        |e| PipelineError::Stage { stage: $stage, message: e.to_string() }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Lexicon,
    Simulate,
    Isolate,
    Segment,
    Features,
    Pretrain,
    Train,
    Decode,
    Eval,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Lexicon,
        Stage::Simulate,
        Stage::Isolate,
        Stage::Segment,
        Stage::Features,
        Stage::Pretrain,
        Stage::Train,
        Stage::Decode,
        Stage::Eval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Lexicon => "lexicon",
            Stage::Simulate => "simulate",
            Stage::Isolate => "isolate",
            Stage::Segment => "segment",
            Stage::Features => "features",
            Stage::Pretrain => "pretrain",
            Stage::Train => "train",
            Stage::Decode => "decode",
            Stage::Eval => "eval",
        }
    }

    pub fn parse(name: &str) -> Result<Stage, PipelineError> {
        Stage::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| PipelineError::UnknownStage(name.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageStatus {
    pub stage: String,
    pub cached: bool,
    pub wall_ms: u128,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecodedRow {
    pub index: usize,
    pub reference: String,
    pub hypothesis: String,
    pub score: f64,
}

/// Machine-readable metrics. Deliberately excludes timings and absolute
/// paths so identical configs and seeds produce byte-identical files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsFile {
    pub schema: u32,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub mean_sentence_wer: f64,
    pub aggregate: EvalResult,
    pub per_sentence: Vec<PerSentence>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerSentence {
    pub index: usize,
    pub reference: String,
    pub hypothesis: String,
    pub wer: f64,
    pub word_accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineReport {
    pub stages: Vec<StageStatus>,
    pub metrics: Option<MetricsFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct StageMarker {
    hash: String,
}

fn sha_hex(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for p in parts {
        hasher.update(p.as_bytes());
        hasher.update([0u8]);
    }
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn section_json<T: Serialize>(stage: &'static str, value: &T) -> Result<String, PipelineError> {
    serde_json::to_string(value).map_err(stage_error!(stage))
}

struct StageContext<'a> {
    cfg: &'a PipelineConfig,
    out: PathBuf,
}

impl StageContext<'_> {
    fn dir(&self, stage: Stage) -> PathBuf {
        self.out.join(stage.name())
    }

    fn marker_matches(&self, stage: Stage, hash: &str) -> bool {
        let path = self.dir(stage).join("stage.json");
        match std::fs::read_to_string(path) {
            Ok(text) => serde_json::from_str::<StageMarker>(&text)
                .map(|m| m.hash == hash)
                .unwrap_or(false),
            Err(_) => false,
        }
    }

    fn write_marker(&self, stage: Stage, hash: &str) -> Result<(), PipelineError> {
        let marker = StageMarker { hash: hash.to_string() };
        std::fs::write(
            self.dir(stage).join("stage.json"),
            serde_json::to_string_pretty(&marker).map_err(stage_error!(stage.name()))?,
        )
        .map_err(stage_error!(stage.name()))
    }
}

/// Stage hashes, chained so every stage hash covers all upstream configs.
fn stage_hashes(cfg: &PipelineConfig) -> Result<Vec<String>, PipelineError> {
    let mut hashes = Vec::with_capacity(Stage::ALL.len());
    let seed = cfg.seed.to_string();
    let mut prev = String::new();
    for stage in Stage::ALL {
        let own = match stage {
            Stage::Lexicon => sha_hex(&[
                "lexicon",
                &seed,
                &section_json("lexicon", &cfg.sentences)?,
                &section_json("lexicon", &cfg.lexicon)?,
            ]),
            Stage::Simulate => sha_hex(&[
                "simulate",
                &section_json("simulate", &cfg.corpus)?,
                &section_json("simulate", &cfg.scene)?,
            ]),
            Stage::Isolate => sha_hex(&["isolate", &section_json("isolate", &cfg.isolation)?]),
            Stage::Segment => sha_hex(&["segment", &section_json("segment", &cfg.segmenter)?]),
            Stage::Features => {
                sha_hex(&["features", &section_json("features", &cfg.clustering)?])
            }
            Stage::Pretrain => sha_hex(&[
                "pretrain",
                &section_json("pretrain", &cfg.frontend)?,
                &section_json("pretrain", &cfg.model)?,
                &section_json("pretrain", &cfg.pretrain)?,
            ]),
            Stage::Train => sha_hex(&[
                "train",
                &section_json("train", &cfg.train)?,
                &cfg.corpus.holdout_fraction.to_string(),
            ]),
            Stage::Decode => sha_hex(&["decode", &section_json("decode", &cfg.decode)?]),
            Stage::Eval => sha_hex(&["eval"]),
        };
        let chained = sha_hex(&[&prev, &own]);
        hashes.push(chained.clone());
        prev = chained;
    }
    Ok(hashes)
}

// ---------------------------------------------------------------------------
// Stage payloads

fn run_lexicon(ctx: &StageContext) -> Result<(), PipelineError> {
    let dir = ctx.dir(Stage::Lexicon);
    let sentences = ctx.cfg.resolve_sentences().map_err(stage_error!("lexicon"))?;
    std::fs::write(dir.join("sentences.txt"), sentences.join("\n") + "\n").map_err(stage_error!("lexicon"))?;
    let freqs = word_frequencies(&sentences, ctx.cfg.lexicon.lowercase);
    let lex = build_lexicon(
        &freqs,
        LexiconOptions {
            max_size: ctx.cfg.lexicon.max_size,
            lowercase: ctx.cfg.lexicon.lowercase,
        },
    )
    .map_err(stage_error!("lexicon"))?;
    lex.save(&dir.join("lexicon.txt")).map_err(stage_error!("lexicon"))?;
    Ok(())
}

fn load_lexicon_and_sentences(ctx: &StageContext) -> Result<(Lexicon, Vec<String>), PipelineError> {
    let dir = ctx.dir(Stage::Lexicon);
    let lex = Lexicon::load(&dir.join("lexicon.txt")).map_err(stage_error!("lexicon"))?;
    let sentences = std::fs::read_to_string(dir.join("sentences.txt"))
        .map_err(stage_error!("lexicon"))?
        .lines()
        .map(|l| l.to_string())
        .filter(|l| !l.is_empty())
        .collect();
    Ok((lex, sentences))
}

fn run_simulate(ctx: &StageContext) -> Result<(), PipelineError> {
    let (lex, sentences) = load_lexicon_and_sentences(ctx)?;
    let mut used: Vec<u32> = Vec::new();
    for s in &sentences {
        if let Ok(seq) = lex.tokenize(s) {
            used.extend(lex.content_ids(&seq));
        }
    }
    used.sort_unstable();
    used.dedup();
    let bank = MotifBank::synthetic_grid(&used, &ctx.cfg.scene);
    let dir = ctx.dir(Stage::Simulate);
    std::fs::write(
        dir.join("motif_bank.json"),
        serde_json::to_string_pretty(&bank).map_err(stage_error!("simulate"))?,
    )
    .map_err(stage_error!("simulate"))?;
    let params = CorpusParams {
        n_per_sentence: ctx.cfg.corpus.n_per_sentence,
        inter_unit_gap_s: ctx.cfg.corpus.inter_unit_gap_s,
    };
    generate_corpus(&sentences, &lex, &bank, &params, &ctx.cfg.scene, ctx.cfg.seed, &dir)
        .map_err(stage_error!("simulate"))?;
    Ok(())
}

fn load_manifest(ctx: &StageContext) -> Result<CorpusManifest, PipelineError> {
    CorpusManifest::load(&ctx.dir(Stage::Simulate)).map_err(stage_error!("simulate"))
}

fn trace_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("utt_{index:05}.trace"))
}

fn run_isolate(ctx: &StageContext) -> Result<(), PipelineError> {
    let manifest = load_manifest(ctx)?;
    let sim_dir = ctx.dir(Stage::Simulate);
    let dir = ctx.dir(Stage::Isolate);
    let results: Result<Vec<()>, PipelineError> = manifest
        .rows
        .par_iter()
        .enumerate()
        .map(|(i, row)| {
            let iq = io::read_iq(&sim_dir.join(&row.iq_path)).map_err(stage_error!("isolate"))?;
            let (trace, _) = extract_motion_trace(&iq, &ctx.cfg.isolation).map_err(stage_error!("isolate"))?;
            io::write_trace(&trace_path(&dir, i), &trace).map_err(stage_error!("isolate"))?;
            Ok(())
        })
        .collect();
    results.map(|_| ())
}

fn load_trace(dir: &Path, index: usize) -> Result<MotionTrace, io::IoError> {
    io::read_trace(&trace_path(dir, index))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SegmentRow {
    start_s: f64,
    end_s: f64,
}

fn run_segment(ctx: &StageContext) -> Result<(), PipelineError> {
    let manifest = load_manifest(ctx)?;
    let iso_dir = ctx.dir(Stage::Isolate);
    let dir = ctx.dir(Stage::Segment);
    let results: Result<Vec<()>, PipelineError> = (0..manifest.rows.len())
        .into_par_iter()
        .map(|i| {
            let trace = load_trace(&iso_dir, i).map_err(stage_error!("segment"))?;
            let result = segment_units(&trace, &ctx.cfg.segmenter).map_err(stage_error!("segment"))?;
            let mut lines = String::new();
            for seg in &result.segments {
                let row = SegmentRow { start_s: seg.start_s, end_s: seg.end_s };
                lines.push_str(&serde_json::to_string(&row).map_err(stage_error!("segment"))?);
                lines.push('\n');
            }
            std::fs::write(dir.join(format!("utt_{i:05}.segments.jsonl")), lines).map_err(stage_error!("segment"))?;
            Ok(())
        })
        .collect();
    results.map(|_| ())
}

fn load_segments(dir: &Path, index: usize) -> Result<Vec<SegmentRow>, PipelineError> {
    let text = std::fs::read_to_string(dir.join(format!("utt_{index:05}.segments.jsonl")))
        .map_err(stage_error!("segment"))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(stage_error!("segment")))
        .collect()
}

/// Row manifest entry for the feature table.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct UnitRow {
    utterance: usize,
    segment: usize,
    start_s: f64,
    end_s: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelsFile {
    labels: Vec<usize>,
    distribution: Vec<usize>,
}

fn unit_slice(trace: &MotionTrace, row: &SegmentRow) -> UnitSegment {
    let rate = trace.values.sample_rate_hz;
    let a = (row.start_s * rate).round() as usize;
    let b = ((row.end_s * rate).round() as usize).min(trace.values.len());
    UnitSegment {
        start_s: row.start_s,
        end_s: row.end_s,
        values: RealSeries::new(trace.values.values[a..b].to_vec(), rate),
        source_utterance: String::new(),
    }
}

fn collect_units(
    ctx: &StageContext,
    n_utterances: usize,
) -> Result<Vec<(UnitRow, UnitSegment)>, PipelineError> {
    let iso_dir = ctx.dir(Stage::Isolate);
    let seg_dir = ctx.dir(Stage::Segment);
    let mut units = Vec::new();
    for i in 0..n_utterances {
        let trace = load_trace(&iso_dir, i).map_err(stage_error!("features"))?;
        for (j, row) in load_segments(&seg_dir, i)?.into_iter().enumerate() {
            let seg = unit_slice(&trace, &row);
            if seg.values.len() >= MIN_SEGMENT_SAMPLES {
                units.push((
                    UnitRow { utterance: i, segment: j, start_s: row.start_s, end_s: row.end_s },
                    seg,
                ));
            }
        }
    }
    Ok(units)
}

fn run_features(ctx: &StageContext) -> Result<(), PipelineError> {
    let manifest = load_manifest(ctx)?;
    let dir = ctx.dir(Stage::Features);
    let units = collect_units(ctx, manifest.rows.len())?;
    if units.len() < 2 {
        return Err(PipelineError::Stage {
            stage: "features",
            message: format!("only {} usable units were segmented", units.len()),
        });
    }
    let vectors: Result<Vec<Vec<f64>>, _> =
        units.par_iter().map(|(_, seg)| extract_features(seg)).collect();
    let vectors = vectors.map_err(stage_error!("features"))?;
    let scaler = fit_scaler(&vectors).map_err(stage_error!("features"))?;
    let scaled: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| apply_scaler(&scaler, v))
        .collect::<Result<_, _>>()
        .map_err(stage_error!("features"))?;

    let k = ctx.cfg.clustering.k.min(scaled.len());
    let fit = kmeans(
        &scaled,
        k,
        derive_seed(ctx.cfg.seed, 0xC1C1),
        KmeansOptions { max_iter: ctx.cfg.clustering.max_iter, n_init: ctx.cfg.clustering.n_init },
    )
    .map_err(stage_error!("features"))?;
    let labels = assign_pseudo_labels(&fit.model, &scaled);

    let rows: Vec<&UnitRow> = units.iter().map(|(r, _)| r).collect();
    io::write_feature_table(
        &dir.join("features.bin"),
        &scaled,
        Some(serde_json::to_value(&rows).map_err(stage_error!("features"))?),
    )
    .map_err(stage_error!("features"))?;
    std::fs::write(dir.join("scaler.json"), serde_json::to_string_pretty(&scaler).map_err(stage_error!("features"))?)
        .map_err(stage_error!("features"))?;
    std::fs::write(
        dir.join("clusters.json"),
        serde_json::to_string_pretty(&fit.model).map_err(stage_error!("features"))?,
    )
    .map_err(stage_error!("features"))?;
    std::fs::write(
        dir.join("labels.json"),
        serde_json::to_string_pretty(&LabelsFile {
            labels: labels.labels,
            distribution: labels.distribution,
        })
        .map_err(stage_error!("features"))?,
    )
    .map_err(stage_error!("features"))?;
    Ok(())
}

fn run_pretrain(ctx: &StageContext) -> Result<(), PipelineError> {
    let manifest = load_manifest(ctx)?;
    let feat_dir = ctx.dir(Stage::Features);
    let labels: LabelsFile =
        serde_json::from_str(&std::fs::read_to_string(feat_dir.join("labels.json")).map_err(stage_error!("pretrain"))?)
            .map_err(stage_error!("pretrain"))?;
    let clusters: ClusterModel = serde_json::from_str(
        &std::fs::read_to_string(feat_dir.join("clusters.json")).map_err(stage_error!("pretrain"))?,
    )
    .map_err(stage_error!("pretrain"))?;
    let units = collect_units(ctx, manifest.rows.len())?;
    if units.len() != labels.labels.len() {
        return Err(PipelineError::Stage {
            stage: "pretrain",
            message: format!(
                "unit count {} does not match label count {}",
                units.len(),
                labels.labels.len()
            ),
        });
    }

    let frontend = &ctx.cfg.frontend;
    let mut dataset: Vec<(FrameSequence, usize)> = Vec::new();
    for ((_, seg), &label) in units.iter().zip(&labels.labels) {
        if seg.values.len() >= frontend.window_len {
            let frames = featurize_series(&seg.values, frontend).map_err(stage_error!("pretrain"))?;
            dataset.push((frames, label));
        }
    }
    if dataset.is_empty() {
        return Err(PipelineError::Stage {
            stage: "pretrain",
            message: "no unit long enough for the frontend window".into(),
        });
    }

    let (lex, _) = load_lexicon_and_sentences(ctx)?;
    let model_cfg = ctx
        .cfg
        .model
        .to_model_config(lex.size(), frontend.n_bins())
        .map_err(stage_error!("pretrain"))?;
    let (classifier, losses) = pretrain_units(
        &dataset,
        clusters.k,
        &model_cfg,
        &ctx.cfg.pretrain.to_train_config(),
        derive_seed(ctx.cfg.seed, 0x9E97),
    )
    .map_err(stage_error!("pretrain"))?;
    let dir = ctx.dir(Stage::Pretrain);
    checkpoint::save_unit_classifier(&dir.join("pretrain.swck"), &classifier).map_err(stage_error!("pretrain"))?;
    std::fs::write(dir.join("losses.json"), serde_json::to_string_pretty(&losses).map_err(stage_error!("pretrain"))?)
        .map_err(stage_error!("pretrain"))?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct SplitFile {
    train: Vec<usize>,
    test: Vec<usize>,
}

fn run_train(ctx: &StageContext) -> Result<(), PipelineError> {
    let manifest = load_manifest(ctx)?;
    let (lex, _) = load_lexicon_and_sentences(ctx)?;
    let iso_dir = ctx.dir(Stage::Isolate);
    let frontend = &ctx.cfg.frontend;

    let dataset: Result<Vec<_>, PipelineError> = (0..manifest.rows.len())
        .into_par_iter()
        .map(|i| {
            let trace = load_trace(&iso_dir, i).map_err(stage_error!("train"))?;
            let frames = featurize_series(&trace.values, frontend).map_err(stage_error!("train"))?;
            let tokens = lex.tokenize(&manifest.rows[i].transcript).map_err(stage_error!("train"))?;
            Ok((frames, tokens))
        })
        .collect();
    let dataset = dataset?;

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(ctx.cfg.seed, 0x5B117));
    order.shuffle(&mut rng);
    let n_test = ((dataset.len() as f64) * ctx.cfg.corpus.holdout_fraction).round() as usize;
    let split = SplitFile {
        test: order[..n_test].to_vec(),
        train: order[n_test..].to_vec(),
    };

    let model_cfg = ctx
        .cfg
        .model
        .to_model_config(lex.size(), frontend.n_bins())
        .map_err(stage_error!("train"))?;
    let pretrained =
        checkpoint::load_unit_classifier(&ctx.dir(Stage::Pretrain).join("pretrain.swck"))
            .map_err(stage_error!("train"))?;
    let train_set: Vec<_> = split.train.iter().map(|&i| dataset[i].clone()).collect();
    let (model, losses) = train_seq2seq(
        &train_set,
        &model_cfg,
        Some(&pretrained.encoder),
        &ctx.cfg.train.to_train_config(),
        derive_seed(ctx.cfg.seed, 0x7EA1),
    )
    .map_err(stage_error!("train"))?;

    let dir = ctx.dir(Stage::Train);
    checkpoint::save_seq2seq(&dir.join("model.swck"), &model).map_err(stage_error!("train"))?;
    std::fs::write(dir.join("split.json"), serde_json::to_string_pretty(&split).map_err(stage_error!("train"))?)
        .map_err(stage_error!("train"))?;
    std::fs::write(dir.join("losses.json"), serde_json::to_string_pretty(&losses).map_err(stage_error!("train"))?)
        .map_err(stage_error!("train"))?;
    Ok(())
}

fn run_decode(ctx: &StageContext) -> Result<(), PipelineError> {
    let manifest = load_manifest(ctx)?;
    let (lex, _) = load_lexicon_and_sentences(ctx)?;
    let split: SplitFile = serde_json::from_str(
        &std::fs::read_to_string(ctx.dir(Stage::Train).join("split.json")).map_err(stage_error!("decode"))?,
    )
    .map_err(stage_error!("decode"))?;
    if split.test.is_empty() {
        return Err(PipelineError::Stage {
            stage: "decode",
            message: "holdout produced an empty test set".into(),
        });
    }
    let model =
        checkpoint::load_seq2seq(&ctx.dir(Stage::Train).join("model.swck")).map_err(stage_error!("decode"))?;
    let iso_dir = ctx.dir(Stage::Isolate);
    let beam = BeamConfig {
        width: ctx.cfg.decode.beam_width,
        max_len: ctx.cfg.decode.max_len,
        length_penalty: ctx.cfg.decode.length_penalty,
    };
    let rows: Result<Vec<DecodedRow>, PipelineError> = split
        .test
        .par_iter()
        .map(|&i| {
            let trace = load_trace(&iso_dir, i).map_err(stage_error!("decode"))?;
            let frames = featurize_series(&trace.values, &ctx.cfg.frontend).map_err(stage_error!("decode"))?;
            let (tokens, score) = beam_search(&model, &frames, beam).map_err(stage_error!("decode"))?;
            let hypothesis = lex.detokenize(&tokens).map_err(stage_error!("decode"))?;
            Ok(DecodedRow {
                index: i,
                reference: manifest.rows[i].transcript.clone(),
                hypothesis,
                score,
            })
        })
        .collect();
    let rows = rows?;
    let mut lines = String::new();
    for row in &rows {
        lines.push_str(&serde_json::to_string(row).map_err(stage_error!("decode"))?);
        lines.push('\n');
    }
    std::fs::write(ctx.dir(Stage::Decode).join("hyps.jsonl"), lines).map_err(stage_error!("decode"))?;
    Ok(())
}

fn run_eval(ctx: &StageContext) -> Result<MetricsFile, PipelineError> {
    let text = std::fs::read_to_string(ctx.dir(Stage::Decode).join("hyps.jsonl")).map_err(stage_error!("eval"))?;
    let rows: Vec<DecodedRow> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(stage_error!("eval")))
        .collect::<Result<_, _>>()?;
    let split: SplitFile = serde_json::from_str(
        &std::fs::read_to_string(ctx.dir(Stage::Train).join("split.json")).map_err(stage_error!("eval"))?,
    )
    .map_err(stage_error!("eval"))?;

    let refs: Vec<String> = rows.iter().map(|r| r.reference.clone()).collect();
    let hyps: Vec<String> = rows.iter().map(|r| r.hypothesis.clone()).collect();
    let corpus = eval_corpus(&refs, &hyps).map_err(stage_error!("eval"))?;
    let per_sentence = rows
        .iter()
        .zip(&corpus.per_sentence)
        .map(|(row, e)| PerSentence {
            index: row.index,
            reference: row.reference.clone(),
            hypothesis: row.hypothesis.clone(),
            wer: e.wer,
            word_accuracy: e.word_accuracy,
        })
        .collect();
    let metrics = MetricsFile {
        schema: 1,
        seed: ctx.cfg.seed,
        n_train: split.train.len(),
        n_test: split.test.len(),
        mean_sentence_wer: corpus.mean_sentence_wer,
        aggregate: corpus.aggregate,
        per_sentence,
    };
    std::fs::write(
        ctx.dir(Stage::Eval).join("metrics.json"),
        serde_json::to_string_pretty(&metrics).map_err(stage_error!("eval"))?,
    )
    .map_err(stage_error!("eval"))?;
    Ok(metrics)
}

// ---------------------------------------------------------------------------
// Orchestration

/// Run stages `from..=to` (defaults: the whole chain), reusing cached
/// outputs whose config hashes are unchanged. Stages upstream of `from`
/// must already be cached and current.
pub fn run_pipeline(
    cfg: &PipelineConfig,
    out_dir: &Path,
    from: Option<Stage>,
    to: Option<Stage>,
) -> Result<PipelineReport, PipelineError> {
    let from = from.unwrap_or(Stage::Lexicon);
    let to = to.unwrap_or(Stage::Eval);
    if from > to {
        return Err(PipelineError::Config("--from stage is after --to stage".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(stage_error!("pipeline"))?;
    let ctx = StageContext { cfg, out: out_dir.to_path_buf() };
    let hashes = stage_hashes(cfg)?;

    let mut statuses = Vec::new();
    let mut metrics = None;
    for (stage, hash) in Stage::ALL.into_iter().zip(&hashes) {
        if stage > to {
            break;
        }
        if stage < from {
            if !ctx.marker_matches(stage, hash) {
                return Err(PipelineError::StaleCache { stage: stage.name() });
            }
            continue;
        }
        let cached = ctx.marker_matches(stage, hash);
        let start = Instant::now();
        if !cached {
            let dir = ctx.dir(stage);
            if dir.exists() {
                std::fs::remove_dir_all(&dir).map_err(stage_error!(stage.name()))?;
            }
            std::fs::create_dir_all(&dir).map_err(stage_error!(stage.name()))?;
            match stage {
                Stage::Lexicon => run_lexicon(&ctx)?,
                Stage::Simulate => run_simulate(&ctx)?,
                Stage::Isolate => run_isolate(&ctx)?,
                Stage::Segment => run_segment(&ctx)?,
                Stage::Features => run_features(&ctx)?,
                Stage::Pretrain => run_pretrain(&ctx)?,
                Stage::Train => run_train(&ctx)?,
                Stage::Decode => run_decode(&ctx)?,
                Stage::Eval => {
                    metrics = Some(run_eval(&ctx)?);
                }
            }
            ctx.write_marker(stage, hash)?;
        } else if stage == Stage::Eval {
            let text = std::fs::read_to_string(ctx.dir(Stage::Eval).join("metrics.json"))
                .map_err(stage_error!("eval"))?;
            metrics = Some(serde_json::from_str(&text).map_err(stage_error!("eval"))?);
        }
        statuses.push(StageStatus {
            stage: stage.name().to_string(),
            cached,
            wall_ms: start.elapsed().as_millis(),
        });
    }

    let report = PipelineReport { stages: statuses, metrics };
    write_report_text(out_dir, &report).map_err(stage_error!("pipeline"))?;
    Ok(report)
}

fn write_report_text(out_dir: &Path, report: &PipelineReport) -> std::io::Result<()> {
    let mut text = String::from("stage        status   wall_ms\n");
    for s in &report.stages {
        let status = if s.cached { "cached" } else { "ran" };
        text.push_str(&format!("{:<12} {:<8} {}\n", s.stage, status, s.wall_ms));
    }
    if let Some(m) = &report.metrics {
        text.push_str(&format!(
            "\ntest utterances: {}\nmean sentence WER: {:.4}\naggregate WER: {:.4}\nword accuracy: {:.4}\n",
            m.n_test, m.mean_sentence_wer, m.aggregate.wer, m.aggregate.word_accuracy
        ));
    }
    std::fs::write(out_dir.join("report.txt"), text)
}
