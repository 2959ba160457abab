//! End-to-end benchmark: ingest, clean, encode, split, vectorize, train every
//! enabled model, evaluate on the test split, persist models and reports.
//!
//! Output directory layout after [`run_benchmark`] and [`emit_report`]:
//!
//! | file | contents |
//! |---|---|
//! | `<kind>.model` | model artifact per enabled model (see [`crate::artifact`]) |
//! | `predictions.csv` | `id,truth` then `<kind>,<kind>_score` per model, one row per test document |
//! | `comparison.md` | markdown comparison table |
//! | `results.jsonl` | one [`ResultRecord`] per model, config order |
//! | `dataset.json` | [`DatasetStats`] |
//! | `config.toml` | effective configuration |
//! | `distribution.svg`, `distribution.csv` | label distribution chart and data |
//! | `comparison.svg`, `comparison.csv` | grouped metric chart and data |
//! | `timings.json` | wall-clock seconds per model |
//!
//! Everything except `timings.json` is byte-identical across runs of one
//! config.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::artifact::{self, ArtifactError, ModelArtifact, TrainedModel};
use crate::config::{ConfigError, ModelHyper, ModelKind, RunConfig};
use crate::corpus::{self, Corpus, CorpusError, Label, LabelCounts};
use crate::eval::{self, compare, EvalError, MetricsReport};
use crate::forest::{self, ForestError};
use crate::linear::{self, LinearError};
use crate::neural::{self, NeuralError};
use crate::report;
use crate::sparse::SparseVector;
use crate::vectorize::{TfidfModel, VectorizeError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("hyperparameters do not fit model kind {0}")]
    HyperMismatch(ModelKind),
    #[error("prediction failed: {0}")]
    Predict(String),
}

impl ModelError {
    pub fn is_divergence(&self) -> bool {
        matches!(
            self,
            ModelError::Linear(LinearError::Diverged { .. }) | ModelError::Neural(NeuralError::DivergedTraining { .. })
        )
    }
}

#[derive(Debug)]
pub struct ModelFailure {
    pub kind: ModelKind,
    pub error: ModelError,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("ingest: {0}")]
    Ingest(#[source] CorpusError),
    #[error("encode: {0}")]
    Encode(#[source] CorpusError),
    #[error("split: {0}")]
    Split(#[source] CorpusError),
    #[error("vectorize: {0}")]
    Vectorize(#[from] VectorizeError),
    #[error("train {kind}: {error}")]
    Train { kind: ModelKind, error: ModelError },
    #[error("write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("artifact: {0}")]
    Artifact(#[from] ArtifactError),
    #[error("read results from {path}: {message}")]
    Results { path: String, message: String },
    #[error("{} model(s) failed: {}", failures.len(), describe(failures))]
    PartialFailure {
        failures: Vec<ModelFailure>,
        result: Box<BenchmarkResult>,
    },
}

fn describe(failures: &[ModelFailure]) -> String {
    failures
        .iter()
        .map(|f| format!("{}: {}", f.kind, f.error))
        .collect::<Vec<_>>()
        .join("; ")
}

impl HarnessError {
    /// Errors caused by the input data rather than by training or the
    /// filesystem.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            HarnessError::Ingest(_) | HarnessError::Encode(_) | HarnessError::Split(_) | HarnessError::Vectorize(_)
        )
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub source: String,
    /// Data rows read from the file.
    pub rows: usize,
    /// Rows removed for a missing body or label.
    pub dropped: usize,
    pub distribution: LabelCounts,
    pub train_size: usize,
    pub test_size: usize,
    /// Training documents actually used, after optional subsampling.
    pub train_used: usize,
    pub vocabulary_size: usize,
    /// SHA-256 over the train and test feature vectors and labels.
    pub features_sha256: String,
}

/// Cleaned, label-encoded corpus plus ingestion counts.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub corpus: Corpus,
    pub rows: usize,
    pub dropped: usize,
    pub distribution: LabelCounts,
}

pub fn ingest(cfg: &RunConfig) -> Result<Ingested, HarnessError> {
    let raw = corpus::load_csv(&cfg.dataset.path, &cfg.dataset.columns()).map_err(HarnessError::Ingest)?;
    let clean = corpus::drop_missing(&raw);
    let encoded = corpus::encode_labels(&clean, &cfg.labels.mapping()).map_err(HarnessError::Encode)?;
    if encoded.is_empty() {
        return Err(HarnessError::Ingest(CorpusError::EmptyCorpus));
    }
    let distribution = corpus::label_distribution(&encoded).map_err(HarnessError::Encode)?;
    Ok(Ingested {
        rows: raw.len(),
        dropped: raw.len() - clean.len(),
        corpus: encoded,
        distribution,
    })
}

/// Train split (subsampled when `run.sample` is set) and test split.
pub fn split_corpus(cfg: &RunConfig, corpus: &Corpus) -> Result<(Corpus, Corpus, usize), HarnessError> {
    let (train, test) = corpus::split(corpus, &cfg.split).map_err(HarnessError::Split)?;
    if train.is_empty() || test.is_empty() {
        return Err(HarnessError::Split(CorpusError::InvalidSplit(cfg.split.test_fraction)));
    }
    let full = train.len();
    let train = match cfg.run.sample {
        Some(n) => corpus::sample(&train, n, cfg.run.seed),
        None => train,
    };
    Ok((train, test, full))
}

/// Vectorized train and test splits, shared by every model.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub stats: DatasetStats,
    pub train: Corpus,
    pub test: Corpus,
    pub tfidf: TfidfModel,
    pub train_x: Vec<SparseVector>,
    pub train_y: Vec<Label>,
    pub test_x: Vec<SparseVector>,
    pub test_y: Vec<Label>,
}

pub fn prepare(cfg: &RunConfig) -> Result<PreparedData, HarnessError> {
    let ing = ingest(cfg)?;
    let (train, test, train_full) = split_corpus(cfg, &ing.corpus)?;
    let tfidf = TfidfModel::fit(&train, cfg.vectorizer)?;
    let train_x = tfidf.transform_corpus(&train);
    let test_x = tfidf.transform_corpus(&test);
    let train_y = train.labels().map_err(HarnessError::Encode)?;
    let test_y = test.labels().map_err(HarnessError::Encode)?;
    let stats = DatasetStats {
        source: ing.corpus.source().to_string(),
        rows: ing.rows,
        dropped: ing.dropped,
        distribution: ing.distribution,
        train_size: train_full,
        test_size: test.len(),
        train_used: train.len(),
        vocabulary_size: tfidf.dim(),
        features_sha256: features_fingerprint(&[(&train_x, &train_y), (&test_x, &test_y)]),
    };
    Ok(PreparedData {
        stats,
        train,
        test,
        tfidf,
        train_x,
        train_y,
        test_x,
        test_y,
    })
}

/// Hash of vector lists and labels, sensitive to every bit of every value.
pub fn features_fingerprint(parts: &[(&[SparseVector], &[Label])]) -> String {
    let mut h = Sha256::new();
    for (xs, ys) in parts {
        h.update((xs.len() as u64).to_le_bytes());
        for (x, y) in xs.iter().zip(ys.iter()) {
            h.update([y.value()]);
            h.update((x.dim() as u64).to_le_bytes());
            h.update((x.nnz() as u64).to_le_bytes());
            for (i, v) in x.iter() {
                h.update((i as u64).to_le_bytes());
                h.update(v.to_bits().to_le_bytes());
            }
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn train_model(
    kind: ModelKind,
    hyper: &ModelHyper,
    xs: &[SparseVector],
    ys: &[Label],
) -> Result<TrainedModel, ModelError> {
    Ok(match (kind, hyper) {
        (ModelKind::Logreg, ModelHyper::Linear(h)) => TrainedModel::Linear(linear::train_logreg(xs, ys, h)?),
        (ModelKind::Svm, ModelHyper::Linear(h)) => TrainedModel::Linear(linear::train_svm(xs, ys, h)?),
        (ModelKind::Forest, ModelHyper::Forest(h)) => TrainedModel::Forest(forest::train_forest(xs, ys, h)?),
        (ModelKind::MlpBaseline | ModelKind::MlpRegularized, ModelHyper::Mlp(h)) => {
            TrainedModel::Mlp(neural::train_mlp(xs, ys, h)?)
        }
        _ => return Err(ModelError::HyperMismatch(kind)),
    })
}

/// One trained and evaluated model.
#[derive(Debug, Clone)]
pub struct ModelOutcome {
    pub kind: ModelKind,
    pub artifact: ModelArtifact,
    pub report: MetricsReport,
    /// Label and score per test document.
    pub predictions: Vec<(Label, f64)>,
}

pub fn predict_all(model: &TrainedModel, xs: &[SparseVector]) -> Result<Vec<(Label, f64)>, ModelError> {
    xs.par_iter()
        .map(|x| model.predict(x).map_err(ModelError::Predict))
        .collect()
}

/// Trains `kind` on the prepared train split and evaluates it on the test split.
pub fn fit_and_evaluate(cfg: &RunConfig, kind: ModelKind, data: &PreparedData) -> Result<ModelOutcome, ModelError> {
    let hyper = cfg.hyper(kind).ok_or(ModelError::HyperMismatch(kind))?;
    let start = Instant::now();
    let model = train_model(kind, &hyper, &data.train_x, &data.train_y)?;
    let predictions = predict_all(&model, &data.test_x)?;
    let elapsed = start.elapsed().as_secs_f64();
    let pred: Vec<Label> = predictions.iter().map(|p| p.0).collect();
    let report = MetricsReport::evaluate(kind.display_name(), &data.test_y, &pred, elapsed)?;
    Ok(ModelOutcome {
        kind,
        artifact: ModelArtifact {
            kind,
            tfidf: data.tfidf.clone(),
            model,
            config: cfg.to_toml(),
        },
        report,
        predictions,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelResult {
    pub kind: ModelKind,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkResult {
    /// Effective configuration as TOML.
    pub config: String,
    pub seed: u64,
    pub split_seed: u64,
    pub test_fraction: f64,
    pub dataset: DatasetStats,
    /// One entry per successfully trained model, in config order.
    pub models: Vec<ModelResult>,
}

impl BenchmarkResult {
    pub fn reports(&self) -> Vec<MetricsReport> {
        self.models.iter().map(|m| m.report.clone()).collect()
    }

    pub fn report_for(&self, kind: ModelKind) -> Option<&MetricsReport> {
        self.models.iter().find(|m| m.kind == kind).map(|m| &m.report)
    }

    pub fn records(&self) -> Vec<ResultRecord> {
        self.models
            .iter()
            .map(|m| ResultRecord {
                model: m.kind,
                name: m.report.model_name.clone(),
                accuracy: m.report.accuracy,
                precision: m.report.precision,
                recall: m.report.recall,
                f1: m.report.f1,
                tp: m.report.confusion.tp,
                fp: m.report.confusion.fp,
                r#fn: m.report.confusion.fn_,
                tn: m.report.confusion.tn,
                train_size: self.dataset.train_used,
                test_size: self.dataset.test_size,
                vocabulary_size: self.dataset.vocabulary_size,
                features_sha256: self.dataset.features_sha256.clone(),
                seed: self.seed,
                split_seed: self.split_seed,
                test_fraction: self.test_fraction,
            })
            .collect()
    }
}

/// One line of `results.jsonl`. Timings are deliberately absent so that the
/// file is reproducible; they live in `timings.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    /// Model kind tag, e.g. `mlp-baseline`.
    pub model: ModelKind,
    /// Display name used in tables.
    pub name: String,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: usize,
    pub fp: usize,
    pub r#fn: usize,
    pub tn: usize,
    /// Training documents used.
    pub train_size: usize,
    pub test_size: usize,
    pub vocabulary_size: usize,
    pub features_sha256: String,
    /// `run.seed`.
    pub seed: u64,
    pub split_seed: u64,
    pub test_fraction: f64,
}

/// Runs the full pipeline and writes `<kind>.model` and `predictions.csv`
/// into `run.output_dir`. Models train concurrently; each is deterministic
/// on its own, so results do not depend on scheduling.
pub fn run_benchmark(cfg: &RunConfig) -> Result<BenchmarkResult, HarnessError> {
    cfg.validate()?;
    let data = prepare(cfg)?;
    let outcomes: Vec<(ModelKind, Result<ModelOutcome, ModelError>)> = cfg
        .run
        .models
        .par_iter()
        .map(|&kind| {
            log::info!("training {kind}");
            (kind, fit_and_evaluate(cfg, kind, &data))
        })
        .collect();

    let out_dir = &cfg.run.output_dir;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut models = Vec::new();
    let mut done = Vec::new();
    let mut failures = Vec::new();
    for (kind, outcome) in outcomes {
        match outcome {
            Ok(o) => {
                artifact::save_model(&o.artifact, out_dir.join(format!("{}.model", kind.tag())))?;
                models.push(ModelResult {
                    kind,
                    report: o.report.clone(),
                });
                done.push(o);
            }
            Err(error) => failures.push(ModelFailure { kind, error }),
        }
    }
    write_predictions(&out_dir.join("predictions.csv"), &data, &done)?;

    let result = BenchmarkResult {
        config: cfg.to_toml(),
        seed: cfg.run.seed,
        split_seed: cfg.split.seed,
        test_fraction: cfg.split.test_fraction,
        dataset: data.stats,
        models,
    };
    if failures.is_empty() {
        Ok(result)
    } else {
        Err(HarnessError::PartialFailure {
            failures,
            result: Box::new(result),
        })
    }
}

fn write_predictions(path: &Path, data: &PreparedData, outcomes: &[ModelOutcome]) -> Result<(), HarnessError> {
    let mut out = String::from("id,truth");
    for o in outcomes {
        out.push_str(&format!(",{0},{0}_score", o.kind.tag()));
    }
    out.push('\n');
    for (i, (doc, truth)) in data.test.iter().zip(&data.test_y).enumerate() {
        out.push_str(&format!("{},{}", doc.id, truth.name()));
        for o in outcomes {
            let (label, score) = o.predictions[i];
            out.push_str(&format!(",{},{score:.16e}", label.name()));
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

fn write(path: PathBuf, contents: &str, written: &mut Vec<PathBuf>) -> Result<(), HarnessError> {
    fs::write(&path, contents).map_err(io_err(&path))?;
    written.push(path);
    Ok(())
}

/// Writes the report files listed in the module docs; returns their paths.
pub fn emit_report(result: &BenchmarkResult, out_dir: impl AsRef<Path>) -> Result<Vec<PathBuf>, HarnessError> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let reports = result.reports();
    let table = compare(&reports);
    let mut written = Vec::new();

    write(dir.join("comparison.md"), &table.to_markdown(), &mut written)?;
    let mut jsonl = String::new();
    for r in result.records() {
        jsonl.push_str(&serde_json::to_string(&r).expect("records serialize"));
        jsonl.push('\n');
    }
    write(dir.join("results.jsonl"), &jsonl, &mut written)?;
    let dataset = serde_json::to_string_pretty(&result.dataset).expect("stats serialize") + "\n";
    write(dir.join("dataset.json"), &dataset, &mut written)?;
    write(dir.join("config.toml"), &result.config, &mut written)?;
    let counts = &result.dataset.distribution;
    write(dir.join("distribution.svg"), &report::distribution_svg(counts), &mut written)?;
    write(dir.join("distribution.csv"), &report::distribution_csv(counts), &mut written)?;
    write(dir.join("comparison.svg"), &report::comparison_svg(&reports), &mut written)?;
    write(dir.join("comparison.csv"), &report::comparison_csv(&reports), &mut written)?;
    let timings: serde_json::Map<String, serde_json::Value> = result
        .models
        .iter()
        .map(|m| (m.kind.tag().to_string(), serde_json::json!(m.report.wall_time)))
        .collect();
    let timings = serde_json::to_string_pretty(&timings).expect("timings serialize") + "\n";
    write(dir.join("timings.json"), &timings, &mut written)?;
    Ok(written)
}

/// Rebuilds a result from files written by [`emit_report`]. Wall times come
/// from `timings.json` when present and are 0 otherwise.
pub fn load_result(dir: impl AsRef<Path>) -> Result<BenchmarkResult, HarnessError> {
    let dir = dir.as_ref();
    let read = |name: &str| {
        let p = dir.join(name);
        fs::read_to_string(&p).map_err(io_err(&p))
    };
    let bad = |name: &str, message: String| HarnessError::Results {
        path: dir.join(name).display().to_string(),
        message,
    };
    let dataset: DatasetStats =
        serde_json::from_str(&read("dataset.json")?).map_err(|e| bad("dataset.json", e.to_string()))?;
    let timings: serde_json::Map<String, serde_json::Value> = match read("timings.json") {
        Ok(t) => serde_json::from_str(&t).map_err(|e| bad("timings.json", e.to_string()))?,
        Err(_) => serde_json::Map::new(),
    };
    let config = read("config.toml").unwrap_or_default();
    let mut models = Vec::new();
    let mut head = None;
    for (i, line) in read("results.jsonl")?.lines().enumerate() {
        let r: ResultRecord =
            serde_json::from_str(line).map_err(|e| bad("results.jsonl", format!("line {}: {e}", i + 1)))?;
        let cm = eval::ConfusionMatrix {
            tp: r.tp,
            fp: r.fp,
            fn_: r.r#fn,
            tn: r.tn,
        };
        let wall = timings.get(r.model.tag()).and_then(|v| v.as_f64()).unwrap_or(0.0);
        let report = MetricsReport::new(r.name.clone(), cm, wall).map_err(|e| bad("results.jsonl", e.to_string()))?;
        head.get_or_insert((r.seed, r.split_seed, r.test_fraction));
        models.push(ModelResult { kind: r.model, report });
    }
    let (seed, split_seed, test_fraction) = head.ok_or_else(|| bad("results.jsonl", "no records".into()))?;
    Ok(BenchmarkResult {
        config,
        seed,
        split_seed,
        test_fraction,
        dataset,
        models,
    })
}
