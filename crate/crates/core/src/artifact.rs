//! Versioned, checksummed text format for trained models.
//!
//! A model file is UTF-8 text, one record per line, fields separated by
//! single spaces. Reals are written in scientific notation with 17
//! significant digits, which round-trips every `f64` exactly.
//!
//! ```text
//! fakenews-model 1
//! kind <logreg|svm|forest|mlp-baseline|mlp-regularized>
//! config <n>                      followed by n lines of TOML training config
//! tfidf <terms> <n_docs> <min_df> <normalize 0|1>
//! <term> <df> <idf>               one line per vocabulary term, index order
//! linear <log|hinge> <lambda> <bias> <dim>
//! <weight>                        one line per weight
//!   -- or --
//! forest <trees> <max_depth> <features_per_split> <seed> <dim>
//! tree                            then the tree in pre-order:
//! split <feature> <threshold>       internal node, left subtree, right subtree
//! leaf <fake_count> <real_count>
//!   -- or --
//! mlp <dropout> <lambda> <n_dims> <dim_0> ... <dim_L>
//! layer <l>                       then one line per input row of W_l,
//! <w_i0> <w_i1> ...                 then one bias line:
//! bias <b_0> <b_1> ...
//! end
//! checksum sha256 <hex>
//! ```
//!
//! The checksum covers every byte before the `checksum` line.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::ModelKind;
use crate::corpus::Label;
use crate::forest::{ForestModel, TreeNode};
use crate::linear::{LinearModel, LossKind};
use crate::neural::MlpModel;
use crate::sparse::SparseVector;
use crate::vectorize::{TfidfConfig, TfidfModel};

pub const MAGIC: &str = "fakenews-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a model file (missing '{MAGIC}' header)")]
    BadMagic,
    #[error("unsupported model format version {0} (this build reads version {FORMAT_VERSION})")]
    UnsupportedVersion(u32),
    #[error("model file has no checksum line")]
    MissingChecksum,
    #[error("checksum mismatch: file says {expected}, content hashes to {actual}")]
    ChecksumMismatch { expected: String, actual: String },
    #[error("unknown model kind '{0}'")]
    UnknownModelKind(String),
    #[error("malformed model file at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("model kind {kind} does not match its parameters")]
    KindMismatch { kind: ModelKind },
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Linear(LinearModel),
    Forest(ForestModel),
    Mlp(MlpModel),
}

impl TrainedModel {
    /// Predicted label plus the model's score: probability of real for
    /// logistic regression and networks, raw margin for the SVM, winning vote
    /// fraction for the forest.
    pub fn predict(&self, x: &SparseVector) -> Result<(Label, f64), String> {
        match self {
            TrainedModel::Linear(m) => {
                let score = m.decision(x).map_err(|e| e.to_string())?;
                let label = crate::linear::label_for_score(score);
                match m.loss() {
                    LossKind::Log => Ok((label, crate::linear::sigmoid(score))),
                    LossKind::Hinge => Ok((label, score)),
                }
            }
            TrainedModel::Forest(f) => {
                if x.dim() != f.dim() {
                    return Err(format!("forest expects {} features, got {}", f.dim(), x.dim()));
                }
                Ok(f.predict(x))
            }
            TrainedModel::Mlp(m) => m.predict(x).map_err(|e| e.to_string()),
        }
    }

    fn matches(&self, kind: ModelKind) -> bool {
        match (self, kind) {
            (TrainedModel::Linear(m), ModelKind::Logreg) => m.loss() == LossKind::Log,
            (TrainedModel::Linear(m), ModelKind::Svm) => m.loss() == LossKind::Hinge,
            (TrainedModel::Forest(_), ModelKind::Forest) => true,
            (TrainedModel::Mlp(_), ModelKind::MlpBaseline | ModelKind::MlpRegularized) => true,
            _ => false,
        }
    }
}

/// A trained model bundled with the vectorizer it was trained against.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    pub kind: ModelKind,
    pub tfidf: TfidfModel,
    pub model: TrainedModel,
    /// TOML snapshot of the configuration used for training.
    pub config: String,
}

impl ModelArtifact {
    pub fn classify(&self, text: &str) -> Result<(Label, f64), String> {
        self.model.predict(&self.tfidf.transform_text(text))
    }

    pub fn to_text(&self) -> Result<String, ArtifactError> {
        if !self.model.matches(self.kind) {
            return Err(ArtifactError::KindMismatch { kind: self.kind });
        }
        let mut out = String::new();
        let _ = writeln!(out, "{MAGIC} {FORMAT_VERSION}");
        let _ = writeln!(out, "kind {}", self.kind.tag());
        let config_lines: Vec<&str> = self.config.lines().collect();
        let _ = writeln!(out, "config {}", config_lines.len());
        for l in config_lines {
            let _ = writeln!(out, "{l}");
        }
        write_tfidf(&mut out, &self.tfidf);
        match &self.model {
            TrainedModel::Linear(m) => write_linear(&mut out, m),
            TrainedModel::Forest(f) => write_forest(&mut out, f),
            TrainedModel::Mlp(m) => write_mlp(&mut out, m),
        }
        out.push_str("end\n");
        let digest = sha256_hex(out.as_bytes());
        let _ = writeln!(out, "checksum sha256 {digest}");
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<Self, ArtifactError> {
        let first = text.lines().next().unwrap_or("");
        let mut head = first.split(' ');
        if head.next() != Some(MAGIC) {
            return Err(ArtifactError::BadMagic);
        }
        let version: u32 = head
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or(ArtifactError::BadMagic)?;
        if version != FORMAT_VERSION {
            return Err(ArtifactError::UnsupportedVersion(version));
        }

        let body = text.strip_suffix('\n').unwrap_or(text);
        let cut = body.rfind('\n').ok_or(ArtifactError::MissingChecksum)?;
        let (payload, trailer) = (&text[..cut + 1], &body[cut + 1..]);
        let expected = trailer
            .strip_prefix("checksum sha256 ")
            .ok_or(ArtifactError::MissingChecksum)?;
        let actual = sha256_hex(payload.as_bytes());
        if expected != actual {
            return Err(ArtifactError::ChecksumMismatch {
                expected: expected.to_string(),
                actual,
            });
        }
        Parser::new(payload).artifact()
    }
}

pub fn save_model(artifact: &ModelArtifact, path: impl AsRef<Path>) -> Result<(), ArtifactError> {
    let path = path.as_ref();
    let io = |source| ArtifactError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(path, artifact.to_text()?).map_err(io)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelArtifact, ArtifactError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ArtifactError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ModelArtifact::from_text(&text)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_tfidf(out: &mut String, m: &TfidfModel) {
    let v = m.vocabulary();
    let cfg = m.config();
    let _ = writeln!(
        out,
        "tfidf {} {} {} {}",
        v.len(),
        v.n_docs(),
        cfg.min_df,
        u8::from(cfg.normalize)
    );
    for ((term, df), idf) in v.terms().iter().zip(v.document_frequency()).zip(m.idf()) {
        let _ = writeln!(out, "{term} {df} {}", real(*idf));
    }
}

fn write_linear(out: &mut String, m: &LinearModel) {
    let _ = writeln!(
        out,
        "linear {} {} {} {}",
        m.loss().name(),
        real(m.lambda()),
        real(m.bias()),
        m.dim()
    );
    for w in m.weights() {
        let _ = writeln!(out, "{}", real(*w));
    }
}

fn write_forest(out: &mut String, f: &ForestModel) {
    let _ = writeln!(
        out,
        "forest {} {} {} {} {}",
        f.n_trees(),
        f.max_depth(),
        f.n_features_per_split(),
        f.seed(),
        f.dim()
    );
    fn node(out: &mut String, n: &TreeNode) {
        match n {
            TreeNode::Internal {
                feature,
                threshold,
                left,
                right,
            } => {
                let _ = writeln!(out, "split {feature} {}", real(*threshold));
                node(out, left);
                node(out, right);
            }
            TreeNode::Leaf { counts } => {
                let _ = writeln!(out, "leaf {} {}", counts[0], counts[1]);
            }
        }
    }
    for t in f.trees() {
        out.push_str("tree\n");
        node(out, t);
    }
}

fn write_mlp(out: &mut String, m: &MlpModel) {
    let dims = m.layer_dims();
    let _ = write!(out, "mlp {} {} {}", real(m.dropout_rate()), real(m.lambda()), dims.len());
    for d in dims {
        let _ = write!(out, " {d}");
    }
    out.push('\n');
    for (l, (w, b)) in m.weights().iter().zip(m.biases()).enumerate() {
        let _ = writeln!(out, "layer {l}");
        let width = dims[l + 1];
        for row in w.chunks(width) {
            let line: Vec<String> = row.iter().map(|v| real(*v)).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        let line: Vec<String> = b.iter().map(|v| real(*v)).collect();
        let _ = writeln!(out, "bias {}", line.join(" "));
    }
}

struct Parser<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    line_no: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser {
            lines: text.lines().enumerate(),
            line_no: 0,
        }
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ArtifactError> {
        Err(ArtifactError::Parse {
            line: self.line_no,
            message: message.into(),
        })
    }

    fn next_line(&mut self) -> Result<&'a str, ArtifactError> {
        match self.lines.next() {
            Some((i, l)) => {
                self.line_no = i + 1;
                Ok(l)
            }
            None => self.err("unexpected end of file"),
        }
    }

    /// Next line split into fields, checking the leading keyword.
    fn record(&mut self, keyword: &str) -> Result<Vec<&'a str>, ArtifactError> {
        let line = self.next_line()?;
        let mut fields = line.split(' ');
        if fields.next() != Some(keyword) {
            return self.err(format!("expected '{keyword}' record"));
        }
        Ok(fields.collect())
    }

    fn num<T: std::str::FromStr>(&self, s: &str) -> Result<T, ArtifactError> {
        match s.parse() {
            Ok(v) => Ok(v),
            Err(_) => self.err(format!("cannot parse '{s}'")),
        }
    }

    fn fields<const N: usize>(&self, f: &[&'a str]) -> Result<[&'a str; N], ArtifactError> {
        match <[&str; N]>::try_from(f) {
            Ok(a) => Ok(a),
            Err(_) => self.err(format!("expected {N} fields, found {}", f.len())),
        }
    }

    fn artifact(mut self) -> Result<ModelArtifact, ArtifactError> {
        self.next_line()?;
        let [kind] = {
            let f = self.record("kind")?;
            self.fields::<1>(&f)?
        };
        let kind: ModelKind = kind
            .parse()
            .map_err(|_| ArtifactError::UnknownModelKind(kind.to_string()))?;
        let [n] = {
            let f = self.record("config")?;
            self.fields::<1>(&f)?
        };
        let n: usize = self.num(n)?;
        let mut config = String::new();
        for _ in 0..n {
            config.push_str(self.next_line()?);
            config.push('\n');
        }
        let tfidf = self.tfidf()?;
        let model = match kind {
            ModelKind::Logreg | ModelKind::Svm => TrainedModel::Linear(self.linear()?),
            ModelKind::Forest => TrainedModel::Forest(self.forest()?),
            ModelKind::MlpBaseline | ModelKind::MlpRegularized => TrainedModel::Mlp(self.mlp()?),
        };
        if !model.matches(kind) {
            return Err(ArtifactError::KindMismatch { kind });
        }
        self.record("end")?;
        if self.lines.next().is_some() {
            return self.err("trailing content after 'end'");
        }
        Ok(ModelArtifact {
            kind,
            tfidf,
            model,
            config,
        })
    }

    fn tfidf(&mut self) -> Result<TfidfModel, ArtifactError> {
        let f = self.record("tfidf")?;
        let [terms, n_docs, min_df, normalize] = self.fields::<4>(&f)?;
        let (terms, n_docs, min_df): (usize, usize, usize) = (self.num(terms)?, self.num(n_docs)?, self.num(min_df)?);
        let normalize = match normalize {
            "0" => false,
            "1" => true,
            other => return self.err(format!("normalize flag '{other}'")),
        };
        let mut words = Vec::with_capacity(terms);
        let mut dfs = Vec::with_capacity(terms);
        let mut idfs = Vec::with_capacity(terms);
        for _ in 0..terms {
            let line = self.next_line()?;
            let f: Vec<&str> = line.split(' ').collect();
            let [term, df, idf] = self.fields::<3>(&f)?;
            words.push(term.to_string());
            dfs.push(self.num(df)?);
            idfs.push(self.num::<f64>(idf)?);
        }
        let model = TfidfModel::from_parts(words, dfs, n_docs, TfidfConfig { min_df, normalize })
            .or_else(|e| self.err(e.to_string()))?;
        if model.idf() != idfs.as_slice() {
            return self.err("stored idf values disagree with document frequencies");
        }
        Ok(model)
    }

    fn linear(&mut self) -> Result<LinearModel, ArtifactError> {
        let f = self.record("linear")?;
        let [loss, lambda, bias, dim] = self.fields::<4>(&f)?;
        let loss = match loss {
            "log" => LossKind::Log,
            "hinge" => LossKind::Hinge,
            other => return self.err(format!("loss '{other}'")),
        };
        let dim: usize = self.num(dim)?;
        let mut weights = Vec::with_capacity(dim);
        for _ in 0..dim {
            let line = self.next_line()?;
            weights.push(self.num(line)?);
        }
        Ok(LinearModel::new(weights, self.num(bias)?, loss, self.num(lambda)?))
    }

    fn tree(&mut self) -> Result<TreeNode, ArtifactError> {
        let line = self.next_line()?;
        let f: Vec<&str> = line.split(' ').collect();
        match f.first() {
            Some(&"split") => {
                let [_, feature, threshold] = self.fields::<3>(&f)?;
                let (feature, threshold) = (self.num(feature)?, self.num(threshold)?);
                let left = self.tree()?;
                let right = self.tree()?;
                Ok(TreeNode::Internal {
                    feature,
                    threshold,
                    left: Box::new(left),
                    right: Box::new(right),
                })
            }
            Some(&"leaf") => {
                let [_, a, b] = self.fields::<3>(&f)?;
                Ok(TreeNode::Leaf {
                    counts: [self.num(a)?, self.num(b)?],
                })
            }
            _ => self.err("expected 'split' or 'leaf'"),
        }
    }

    fn forest(&mut self) -> Result<ForestModel, ArtifactError> {
        let f = self.record("forest")?;
        let [n, depth, k, seed, dim] = self.fields::<5>(&f)?;
        let n: usize = self.num(n)?;
        let mut trees = Vec::with_capacity(n);
        for _ in 0..n {
            self.record("tree")?;
            trees.push(self.tree()?);
        }
        ForestModel::from_parts(trees, self.num(depth)?, self.num(k)?, self.num(seed)?, self.num(dim)?)
            .or_else(|e| self.err(e.to_string()))
    }

    fn mlp(&mut self) -> Result<MlpModel, ArtifactError> {
        let f = self.record("mlp")?;
        if f.len() < 3 {
            return self.err("mlp header too short");
        }
        let dropout: f64 = self.num(f[0])?;
        let lambda: f64 = self.num(f[1])?;
        let n_dims: usize = self.num(f[2])?;
        if f.len() != 3 + n_dims {
            return self.err("mlp layer dims count");
        }
        let dims: Vec<usize> = f[3..].iter().map(|s| self.num(s)).collect::<Result<_, _>>()?;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..n_dims.saturating_sub(1) {
            let [idx] = {
                let f = self.record("layer")?;
                self.fields::<1>(&f)?
            };
            if self.num::<usize>(idx)? != l {
                return self.err("layer out of order");
            }
            let mut w = Vec::with_capacity(dims[l] * dims[l + 1]);
            for _ in 0..dims[l] {
                let line = self.next_line()?;
                let row: Vec<f64> = line.split(' ').map(|s| self.num(s)).collect::<Result<_, _>>()?;
                if row.len() != dims[l + 1] {
                    return self.err("weight row width");
                }
                w.extend(row);
            }
            let b: Vec<f64> = self
                .record("bias")?
                .into_iter()
                .map(|s| self.num(s))
                .collect::<Result<_, _>>()?;
            weights.push(w);
            biases.push(b);
        }
        MlpModel::from_parts(dims, weights, biases, dropout, lambda).or_else(|e| self.err(e.to_string()))
    }
}
