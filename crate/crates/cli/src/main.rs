//! `fakenews`: command-line front end for the classification toolkit.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime failure.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::{Args, Parser, Subcommand, ValueEnum};

use fakenews::artifact::{self, ArtifactError};
use fakenews::config::{ConfigError, ModelKind, RunConfig};
use fakenews::corpus::Label;
use fakenews::eval::{compare, ComparisonTable, MetricsReport};
use fakenews::harness::{self, BenchmarkResult, HarnessError};

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Runtime(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::Data(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(c) => c.into(),
            e if e.is_data_error() => CliError::Data(e.to_string()),
            HarnessError::Artifact(_) | HarnessError::Results { .. } => CliError::Data(e.to_string()),
            e => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<ArtifactError> for CliError {
    fn from(e: ArtifactError) -> Self {
        CliError::Data(format!("model file: {e}"))
    }
}

type CliResult = Result<(), CliError>;

#[derive(Parser, Debug)]
#[command(name = "fakenews", version, about = "Fake/real news classification over TF-IDF features")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load, clean and label-encode a dataset; optionally write the cleaned corpus.
    Ingest(IngestArgs),
    /// Print row counts and the real/fake label distribution.
    Stats(DataArgs),
    /// Train one model on the training split and save it.
    Train(TrainArgs),
    /// Evaluate a saved model on the test split.
    Evaluate(EvaluateArgs),
    /// Classify texts with a saved model.
    Classify(ClassifyArgs),
    /// Run the full pipeline for every enabled model and write reports.
    Benchmark(BenchmarkArgs),
    /// Re-render reports from a benchmark output directory.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Config file (TOML); built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset CSV; overrides `dataset.path` [default: data/news.csv].
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Title column; empty for none [default: title].
    #[arg(long)]
    title_column: Option<String>,
    /// Body text column [default: text].
    #[arg(long)]
    text_column: Option<String>,
    /// Label column [default: label].
    #[arg(long)]
    label_column: Option<String>,
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Write the cleaned corpus as CSV (id,title,text,label with 1 = real).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Subsample the training split to this many documents.
    #[arg(long)]
    sample: Option<usize>,
    /// Seed for model initialization, shuffling, bagging and subsampling; overrides `run.seed` [default: 42].
    #[arg(long)]
    seed: Option<u64>,
}

fn kind_parser() -> impl TypedValueParser<Value = ModelKind> {
    PossibleValuesParser::new(ModelKind::ALL.map(ModelKind::tag))
        .map(|s| s.parse::<ModelKind>().expect("possible values are valid kinds"))
}

#[derive(Args, Debug)]
struct HyperArgs {
    /// SGD learning rate (logreg, svm, mlp-*) [default: 0.1 linear, 0.5 mlp].
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Passes over the training data (logreg, svm, mlp-*) [default: 20 linear, 10 mlp].
    #[arg(long)]
    epochs: Option<usize>,
    /// L2 strength (logreg, svm, mlp-*) [default: 1e-4 linear, 0 mlp-baseline, 1e-4 mlp-regularized].
    #[arg(long)]
    lambda: Option<f64>,
    /// Number of trees (forest) [default: 100].
    #[arg(long)]
    n_trees: Option<usize>,
    /// Maximum tree depth (forest) [default: 40].
    #[arg(long)]
    max_depth: Option<usize>,
    /// Features sampled per split (forest) [default: ceil(sqrt(vocabulary size))].
    #[arg(long)]
    features_per_split: Option<usize>,
    /// Hidden layer widths, comma-separated (mlp-*) [default: 128].
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    /// Mini-batch size (mlp-*) [default: 32].
    #[arg(long)]
    batch_size: Option<usize>,
    /// Dropout rate on hidden layers (mlp-*) [default: 0 mlp-baseline, 0.5 mlp-regularized].
    #[arg(long)]
    dropout: Option<f64>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Model kind.
    #[arg(long, value_parser = kind_parser())]
    model: ModelKind,
    /// Where to write the model file [default: <output_dir>/<model>.model].
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    hyper: HyperArgs,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Saved model file.
    #[arg(long)]
    model: PathBuf,
    /// Table output format.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args, Debug)]
struct ClassifyArgs {
    /// Saved model file.
    #[arg(long)]
    model: PathBuf,
    /// Text to classify; repeatable.
    #[arg(long)]
    text: Vec<String>,
    /// File with one text per line.
    #[arg(long)]
    file: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    /// Config file (TOML); same as --config.
    #[arg(value_name = "CONFIG", conflicts_with = "config")]
    config_path: Option<PathBuf>,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Restrict to these models, comma-separated [default: run.models].
    #[arg(long, value_delimiter = ',', value_parser = kind_parser())]
    model: Option<Vec<ModelKind>>,
    /// Output directory; overrides `run.output_dir` [default: results].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Table output format.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Benchmark output directory to read.
    #[arg(long)]
    results: PathBuf,
    /// Directory for the regenerated report files [default: same as --results].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Table output format.
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    /// Aligned plain text.
    Text,
    /// Markdown table.
    Md,
    /// One JSON record per model.
    Records,
}

fn load_config(data: &DataArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &data.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &data.dataset {
        cfg.dataset.path = p.clone();
    }
    if let Some(c) = &data.title_column {
        cfg.dataset.title_column = c.clone();
    }
    if let Some(c) = &data.text_column {
        cfg.dataset.text_column = c.clone();
    }
    if let Some(c) = &data.label_column {
        cfg.dataset.label_column = c.clone();
    }
    Ok(cfg)
}

fn apply_run(cfg: &mut RunConfig, run: &RunArgs) -> CliResult {
    if let Some(n) = run.sample {
        if n == 0 {
            return Err(CliError::Usage("--sample must be at least 1".into()));
        }
        cfg.run.sample = Some(n);
    }
    if let Some(s) = run.seed {
        cfg.run.seed = s;
    }
    Ok(())
}

fn apply_hyper(cfg: &mut RunConfig, kind: ModelKind, h: &HyperArgs) -> CliResult {
    let misuse = |flag: &str| CliError::Usage(format!("--{flag} does not apply to model '{kind}'"));
    let linear = matches!(kind, ModelKind::Logreg | ModelKind::Svm);
    let mlp = matches!(kind, ModelKind::MlpBaseline | ModelKind::MlpRegularized);
    for (set, flag, ok) in [
        (h.learning_rate.is_some(), "learning-rate", linear || mlp),
        (h.epochs.is_some(), "epochs", linear || mlp),
        (h.lambda.is_some(), "lambda", linear || mlp),
        (h.n_trees.is_some(), "n-trees", kind == ModelKind::Forest),
        (h.max_depth.is_some(), "max-depth", kind == ModelKind::Forest),
        (h.features_per_split.is_some(), "features-per-split", kind == ModelKind::Forest),
        (h.hidden.is_some(), "hidden", mlp),
        (h.batch_size.is_some(), "batch-size", mlp),
        (h.dropout.is_some(), "dropout", mlp),
    ] {
        if set && !ok {
            return Err(misuse(flag));
        }
    }
    let defaults = RunConfig::default();
    match kind {
        ModelKind::Logreg | ModelKind::Svm => {
            let slot = if kind == ModelKind::Logreg { &mut cfg.logreg } else { &mut cfg.svm };
            let s = slot.get_or_insert(defaults.logreg.expect("default block"));
            if let Some(v) = h.learning_rate {
                s.learning_rate = v;
            }
            if let Some(v) = h.epochs {
                s.epochs = v;
            }
            if let Some(v) = h.lambda {
                s.lambda = v;
            }
        }
        ModelKind::Forest => {
            let s = cfg.forest.get_or_insert(defaults.forest.expect("default block"));
            if let Some(v) = h.n_trees {
                s.n_trees = v;
            }
            if let Some(v) = h.max_depth {
                s.max_depth = v;
            }
            if h.features_per_split.is_some() {
                s.n_features_per_split = h.features_per_split;
            }
        }
        ModelKind::MlpBaseline | ModelKind::MlpRegularized => {
            let s = if kind == ModelKind::MlpBaseline {
                cfg.mlp_baseline.get_or_insert_with(|| defaults.mlp_baseline.clone().expect("default block"))
            } else {
                cfg.mlp_regularized
                    .get_or_insert_with(|| defaults.mlp_regularized.clone().expect("default block"))
            };
            if let Some(v) = h.learning_rate {
                s.learning_rate = v;
            }
            if let Some(v) = h.epochs {
                s.epochs = v;
            }
            if let Some(v) = h.lambda {
                s.lambda = v;
            }
            if let Some(v) = &h.hidden {
                s.hidden_dims = v.clone();
            }
            if let Some(v) = h.batch_size {
                s.batch_size = v;
            }
            if let Some(v) = h.dropout {
                s.dropout_rate = v;
            }
        }
    }
    Ok(())
}

/// Rejects hyperparameters the trainers would refuse, before any data is read.
fn check_hyper(cfg: &RunConfig, kind: ModelKind) -> CliResult {
    let bad = |e: String| Err(CliError::Usage(format!("invalid {kind} hyperparameters: {e}")));
    match cfg.hyper(kind) {
        Some(fakenews::config::ModelHyper::Linear(h)) => h.validate().or_else(|e| bad(e.to_string())),
        Some(fakenews::config::ModelHyper::Mlp(h)) => h.validate().or_else(|e| bad(e.to_string())),
        Some(fakenews::config::ModelHyper::Forest(h)) => {
            if h.n_trees == 0 || h.max_depth == 0 || h.n_features_per_split == Some(0) {
                bad("n_trees, max_depth and features_per_split must be positive".into())
            } else {
                Ok(())
            }
        }
        None => bad("no hyperparameter block".into()),
    }
}

fn render(table: &ComparisonTable, records: impl FnOnce() -> String, format: Format) -> String {
    match format {
        Format::Text => table.to_text(),
        Format::Md => table.to_markdown(),
        Format::Records => records(),
    }
}

fn report_records(reports: &[MetricsReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let mut v = serde_json::to_value(r).expect("report serializes");
        if let Some(o) = v.as_object_mut() {
            o.remove("wall_time");
        }
        out.push_str(&v.to_string());
        out.push('\n');
    }
    out
}

fn result_records(result: &BenchmarkResult) -> String {
    result
        .records()
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
        .collect()
}

fn cmd_ingest(args: IngestArgs) -> CliResult {
    let cfg = load_config(&args.data)?;
    cfg.validate()?;
    let ing = harness::ingest(&cfg)?;
    println!("source: {}", ing.corpus.source());
    println!("rows: {}", ing.rows);
    println!("dropped: {}", ing.dropped);
    println!("kept: {}", ing.corpus.len());
    if let Some(out) = args.out {
        let io = |e: std::io::Error| CliError::Runtime(format!("write {}: {e}", out.display()));
        let mut w = csv::Writer::from_path(&out).map_err(|e| CliError::Runtime(format!("write {}: {e}", out.display())))?;
        let rows = std::iter::once(["id".to_string(), "title".into(), "text".into(), "label".into()]).chain(
            ing.corpus.iter().map(|d| {
                let label = d.label.map(|l| l.value().to_string()).unwrap_or_default();
                [d.id.to_string(), d.title.clone(), d.body.clone(), label]
            }),
        );
        for row in rows {
            w.write_record(&row).map_err(|e| CliError::Runtime(format!("write {}: {e}", out.display())))?;
        }
        w.flush().map_err(io)?;
        println!("wrote: {}", out.display());
    }
    Ok(())
}

fn cmd_stats(args: DataArgs) -> CliResult {
    let cfg = load_config(&args)?;
    cfg.validate()?;
    let ing = harness::ingest(&cfg)?;
    let d = ing.distribution;
    println!("rows: {} dropped: {}", ing.rows, ing.dropped);
    println!(
        "real: {} ({:.2}%) fake: {} ({:.2}%)",
        d.real,
        100.0 * d.real_fraction(),
        d.fake,
        100.0 * d.fake_fraction()
    );
    Ok(())
}

fn cmd_train(args: TrainArgs) -> CliResult {
    let mut cfg = load_config(&args.data)?;
    apply_run(&mut cfg, &args.run)?;
    apply_hyper(&mut cfg, args.model, &args.hyper)?;
    cfg.run.models = vec![args.model];
    cfg.validate()?;
    check_hyper(&cfg, args.model)?;
    let out = args
        .out
        .unwrap_or_else(|| cfg.run.output_dir.join(format!("{}.model", args.model.tag())));

    let data = harness::prepare(&cfg)?;
    log::info!(
        "training {} on {} documents, {} features",
        args.model,
        data.train_x.len(),
        data.tfidf.dim()
    );
    let outcome = harness::fit_and_evaluate(&cfg, args.model, &data).map_err(|error| {
        CliError::from(HarnessError::Train {
            kind: args.model,
            error,
        })
    })?;
    let train_pred = harness::predict_all(&outcome.artifact.model, &data.train_x)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let train_pred: Vec<Label> = train_pred.into_iter().map(|p| p.0).collect();
    let train_report = MetricsReport::evaluate("train", &data.train_y, &train_pred, 0.0)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    artifact::save_model(&outcome.artifact, &out).map_err(|e| CliError::Runtime(e.to_string()))?;

    for (split, r) in [("train", &train_report), ("test", &outcome.report)] {
        println!(
            "{split}: accuracy {:.2}% precision {:.2}% recall {:.2}% f1 {:.2}%",
            100.0 * r.accuracy,
            100.0 * r.precision,
            100.0 * r.recall,
            100.0 * r.f1
        );
    }
    println!("model: {}", out.display());
    eprintln!("train+test wall time: {:.2}s", outcome.report.wall_time);
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> CliResult {
    let cfg = load_config(&args.data)?;
    cfg.validate()?;
    let art = artifact::load_model(&args.model)?;
    let ing = harness::ingest(&cfg)?;
    let (_, test, _) = harness::split_corpus(&cfg, &ing.corpus)?;
    let xs = art.tfidf.transform_corpus(&test);
    let truth = test.labels().map_err(|e| CliError::Data(e.to_string()))?;
    let pred = harness::predict_all(&art.model, &xs).map_err(|e| CliError::Data(e.to_string()))?;
    let pred: Vec<Label> = pred.into_iter().map(|p| p.0).collect();
    let report = MetricsReport::evaluate(art.kind.display_name(), &truth, &pred, 0.0)
        .map_err(|e| CliError::Data(e.to_string()))?;
    let reports = [report];
    print!("{}", render(&compare(&reports), || report_records(&reports), args.format));
    Ok(())
}

fn cmd_classify(args: ClassifyArgs) -> CliResult {
    let mut texts = args.text;
    if let Some(f) = &args.file {
        let content = fs::read_to_string(f).map_err(|e| CliError::Data(format!("read {}: {e}", f.display())))?;
        texts.extend(content.lines().map(str::to_string));
    }
    if texts.is_empty() {
        return Err(CliError::Usage("no input: pass --text or --file".into()));
    }
    let art = artifact::load_model(&args.model)?;
    let mut stdout = std::io::stdout().lock();
    for t in &texts {
        let (label, score) = art.classify(t).map_err(CliError::Data)?;
        writeln!(stdout, "{} {score:.6}", label.name()).map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    Ok(())
}

fn cmd_benchmark(args: BenchmarkArgs) -> CliResult {
    let mut data = args.data;
    if args.config_path.is_some() {
        data.config = args.config_path;
    }
    let mut cfg = load_config(&data)?;
    apply_run(&mut cfg, &args.run)?;
    if let Some(models) = args.model {
        cfg.run.models = models;
    }
    if let Some(out) = args.out {
        cfg.run.output_dir = out;
    }
    cfg.validate()?;
    for &k in &cfg.run.models {
        check_hyper(&cfg, k)?;
    }
    println!("# effective configuration\n{}", cfg.to_toml());

    let (result, failure) = match harness::run_benchmark(&cfg) {
        Ok(r) => (r, None),
        Err(HarnessError::PartialFailure { failures, result }) => {
            let msg = failures
                .iter()
                .map(|f| format!("{}: {}", f.kind, f.error))
                .collect::<Vec<_>>()
                .join("; ");
            (*result, Some(CliError::Runtime(format!("train: {msg}"))))
        }
        Err(e) => return Err(e.into()),
    };
    let written = harness::emit_report(&result, &cfg.run.output_dir)?;
    let d = &result.dataset;
    println!(
        "# rows {} dropped {} real {} fake {} train {} (used {}) test {} vocabulary {}",
        d.rows,
        d.dropped,
        d.distribution.real,
        d.distribution.fake,
        d.train_size,
        d.train_used,
        d.test_size,
        d.vocabulary_size
    );
    print!("{}", render(&compare(&result.reports()), || result_records(&result), args.format));
    for m in &result.models {
        eprintln!("{}: {:.2}s", m.kind, m.report.wall_time);
    }
    eprintln!("wrote {} report files to {}", written.len(), cfg.run.output_dir.display());
    failure.map_or(Ok(()), Err)
}

fn cmd_report(args: ReportArgs) -> CliResult {
    let result = harness::load_result(&args.results)?;
    let out: &Path = args.out.as_deref().unwrap_or(&args.results);
    let written = harness::emit_report(&result, out)?;
    print!("{}", render(&compare(&result.reports()), || result_records(&result), args.format));
    eprintln!("wrote {} report files to {}", written.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
