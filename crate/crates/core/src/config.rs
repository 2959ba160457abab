//! Run configuration, read from a TOML file.
//!
//! ```toml
//! [dataset]
//! path = "data/news.csv"      # relative paths resolve against the config file
//! title_column = "title"      # "" for datasets without a title column
//! text_column = "text"
//! label_column = "label"
//!
//! [labels]
//! real = ["real", "1"]
//! fake = ["fake", "0"]
//!
//! [split]
//! test_fraction = 0.2
//! seed = 42
//!
//! [vectorizer]
//! min_df = 2
//! normalize = true
//!
//! [run]
//! models = ["logreg", "svm", "forest", "mlp-baseline", "mlp-regularized"]
//! output_dir = "results"
//! seed = 42                   # model initialization, shuffling, bagging, subsampling
//! # sample = 5000             # optional: subsample the training split
//!
//! [logreg]                    # one block per enabled model
//! learning_rate = 0.1
//! epochs = 20
//! lambda = 1e-4
//! ```
//!
//! Model blocks are `[logreg]`, `[svm]`, `[forest]`, `[mlp_baseline]` and
//! `[mlp_regularized]`; see [`LinearSettings`], [`ForestSettings`] and
//! [`MlpSettings`] for their keys.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ColumnMapping, Label, LabelMapping, SplitSpec};
use crate::forest::ForestHyper;
use crate::linear::TrainHyper;
use crate::neural::MlpHyper;
use crate::vectorize::TfidfConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("unknown model kind '{0}' (expected one of: logreg, svm, forest, mlp-baseline, mlp-regularized)")]
    UnknownModel(String),
}

/// The five trained configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Logreg,
    Svm,
    Forest,
    MlpBaseline,
    MlpRegularized,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Logreg,
        ModelKind::Svm,
        ModelKind::Forest,
        ModelKind::MlpBaseline,
        ModelKind::MlpRegularized,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ModelKind::Logreg => "logreg",
            ModelKind::Svm => "svm",
            ModelKind::Forest => "forest",
            ModelKind::MlpBaseline => "mlp-baseline",
            ModelKind::MlpRegularized => "mlp-regularized",
        }
    }

    /// Row label used in comparison tables.
    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Logreg => "Logistic Regression",
            ModelKind::Svm => "SVM",
            ModelKind::Forest => "Random Forest",
            ModelKind::MlpBaseline => "Neural Networks",
            ModelKind::MlpRegularized => "Neural Networks with Regularisation and Dropouts",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ModelKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| ConfigError::UnknownModel(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub path: PathBuf,
    pub title_column: String,
    pub text_column: String,
    pub label_column: String,
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection {
            path: PathBuf::from("data/news.csv"),
            title_column: "title".into(),
            text_column: "text".into(),
            label_column: "label".into(),
        }
    }
}

impl DatasetSection {
    pub fn columns(&self) -> ColumnMapping {
        ColumnMapping {
            title: (!self.title_column.is_empty()).then(|| self.title_column.clone()),
            body: self.text_column.clone(),
            label: Some(self.label_column.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelSection {
    pub real: Vec<String>,
    pub fake: Vec<String>,
}

impl Default for LabelSection {
    fn default() -> Self {
        LabelSection {
            real: vec!["real".into(), "1".into()],
            fake: vec!["fake".into(), "0".into()],
        }
    }
}

impl LabelSection {
    pub fn mapping(&self) -> LabelMapping {
        LabelMapping::new(
            self.real
                .iter()
                .map(|s| (s.as_str(), Label::Real))
                .chain(self.fake.iter().map(|s| (s.as_str(), Label::Fake))),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub models: Vec<ModelKind>,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Seeded subsample size for the training split.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample: Option<usize>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            models: ModelKind::ALL.to_vec(),
            output_dir: PathBuf::from("results"),
            seed: 42,
            sample: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearSettings {
    pub learning_rate: f64,
    pub epochs: usize,
    pub lambda: f64,
}

impl Default for LinearSettings {
    fn default() -> Self {
        let h = TrainHyper::default();
        LinearSettings {
            learning_rate: h.learning_rate,
            epochs: h.epochs,
            lambda: h.lambda,
        }
    }
}

impl LinearSettings {
    pub fn hyper(&self, seed: u64) -> TrainHyper {
        TrainHyper {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            lambda: self.lambda,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestSettings {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Omit for `ceil(sqrt(vocabulary size))`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_features_per_split: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestSettings {
    fn default() -> Self {
        let h = ForestHyper::default();
        ForestSettings {
            n_trees: h.n_trees,
            max_depth: h.max_depth,
            n_features_per_split: h.n_features_per_split,
            bootstrap: h.bootstrap,
        }
    }
}

impl ForestSettings {
    pub fn hyper(&self, seed: u64) -> ForestHyper {
        ForestHyper {
            n_trees: self.n_trees,
            max_depth: self.max_depth,
            n_features_per_split: self.n_features_per_split,
            bootstrap: self.bootstrap,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpSettings {
    pub hidden_dims: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout_rate: f64,
    pub lambda: f64,
}

impl Default for MlpSettings {
    fn default() -> Self {
        MlpSettings::from(MlpHyper::baseline())
    }
}

impl From<MlpHyper> for MlpSettings {
    fn from(h: MlpHyper) -> Self {
        MlpSettings {
            hidden_dims: h.hidden_dims,
            learning_rate: h.learning_rate,
            epochs: h.epochs,
            batch_size: h.batch_size,
            dropout_rate: h.dropout_rate,
            lambda: h.lambda,
        }
    }
}

impl MlpSettings {
    pub fn hyper(&self, seed: u64) -> MlpHyper {
        MlpHyper {
            hidden_dims: self.hidden_dims.clone(),
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            dropout_rate: self.dropout_rate,
            lambda: self.lambda,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default)]
    pub labels: LabelSection,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default)]
    pub vectorizer: TfidfConfig,
    #[serde(default)]
    pub run: RunSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub logreg: Option<LinearSettings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub svm: Option<LinearSettings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forest: Option<ForestSettings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mlp_baseline: Option<MlpSettings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mlp_regularized: Option<MlpSettings>,
}

impl Default for RunConfig {
    /// Every model enabled with its default block.
    fn default() -> Self {
        RunConfig {
            dataset: DatasetSection::default(),
            labels: LabelSection::default(),
            split: SplitSpec::default(),
            vectorizer: TfidfConfig::default(),
            run: RunSection::default(),
            logreg: Some(LinearSettings::default()),
            svm: Some(LinearSettings::default()),
            forest: Some(ForestSettings::default()),
            mlp_baseline: Some(MlpSettings::from(MlpHyper::baseline())),
            mlp_regularized: Some(MlpSettings::from(MlpHyper::regularized())),
        }
    }
}

/// Hyperparameters for one model, with the run seed applied.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelHyper {
    Linear(TrainHyper),
    Forest(ForestHyper),
    Mlp(MlpHyper),
}

impl RunConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file; relative dataset and output paths are resolved
    /// against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = RunConfig::parse(&text, &path.display().to_string())?;
        if let Some(base) = path.parent() {
            if cfg.dataset.path.is_relative() {
                cfg.dataset.path = base.join(&cfg.dataset.path);
            }
            if cfg.run.output_dir.is_relative() {
                cfg.run.output_dir = base.join(&cfg.run.output_dir);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.dataset.path.as_os_str().is_empty() {
            return invalid("dataset.path must not be empty".into());
        }
        if self.run.output_dir.as_os_str().is_empty() {
            return invalid("run.output_dir must not be empty".into());
        }
        if self.dataset.text_column.is_empty() || self.dataset.label_column.is_empty() {
            return invalid("dataset text_column and label_column must not be empty".into());
        }
        if self.split.validate().is_err() {
            return invalid(format!("split.test_fraction {} must lie in (0, 1)", self.split.test_fraction));
        }
        if self.labels.real.is_empty() || self.labels.fake.is_empty() {
            return invalid("labels.real and labels.fake need at least one value each".into());
        }
        if self.run.models.is_empty() {
            return invalid("run.models enables no model".into());
        }
        if self.run.sample == Some(0) {
            return invalid("run.sample must be >= 1".into());
        }
        for &kind in &self.run.models {
            if self.hyper(kind).is_none() {
                return invalid(format!("model '{kind}' is enabled but has no [{}] block", block_name(kind)));
            }
        }
        Ok(())
    }

    pub fn hyper(&self, kind: ModelKind) -> Option<ModelHyper> {
        let seed = self.run.seed;
        match kind {
            ModelKind::Logreg => self.logreg.map(|s| ModelHyper::Linear(s.hyper(seed))),
            ModelKind::Svm => self.svm.map(|s| ModelHyper::Linear(s.hyper(seed))),
            ModelKind::Forest => self.forest.map(|s| ModelHyper::Forest(s.hyper(seed))),
            ModelKind::MlpBaseline => self.mlp_baseline.as_ref().map(|s| ModelHyper::Mlp(s.hyper(seed))),
            ModelKind::MlpRegularized => self.mlp_regularized.as_ref().map(|s| ModelHyper::Mlp(s.hyper(seed))),
        }
    }
}

pub fn block_name(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Logreg => "logreg",
        ModelKind::Svm => "svm",
        ModelKind::Forest => "forest",
        ModelKind::MlpBaseline => "mlp_baseline",
        ModelKind::MlpRegularized => "mlp_regularized",
    }
}
