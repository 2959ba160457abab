//! Linear classifiers over sparse features: logistic regression (log-loss)
//! and a linear SVM (hinge loss).
//!
//! Both minimize `(1/n) Σ loss_i + (λ/2)‖w‖²` with an unregularized bias, by
//! epoch-wise stochastic (sub)gradient descent over a seeded Fisher–Yates
//! shuffle of the examples. Logistic regression uses a constant step. The
//! SVM uses the Pegasos schedule `η_t = 1/(λ t)` when `λ > 0` and the
//! constant step when `λ = 0`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;
use crate::rng;
use crate::sparse::SparseVector;

#[derive(Debug, Error, PartialEq)]
pub enum LinearError {
    #[error("dimension mismatch: model has {expected} features, input has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{features} feature vectors but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("need at least 2 training examples, got {0}")]
    TooFewExamples(usize),
    #[error("training labels contain a single class")]
    SingleClassTraining,
    #[error("operation requires a {expected:?} model, found {found:?}")]
    WrongModelKind { expected: LossKind, found: LossKind },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyper(String),
    #[error("training diverged: non-finite parameters after epoch {epoch}")]
    Diverged { epoch: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Log,
    Hinge,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::Log => "log",
            LossKind::Hinge => "hinge",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainHyper {
    pub learning_rate: f64,
    pub epochs: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            learning_rate: 0.1,
            epochs: 20,
            lambda: 1e-4,
            seed: 42,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<(), LinearError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(LinearError::InvalidHyper(format!("learning_rate {} must be > 0", self.learning_rate)));
        }
        if self.epochs == 0 {
            return Err(LinearError::InvalidHyper("epochs must be >= 1".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(LinearError::InvalidHyper(format!("lambda {} must be >= 0", self.lambda)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    weights: Vec<f64>,
    bias: f64,
    loss: LossKind,
    lambda: f64,
}

/// Logistic function, evaluated without overflow for any finite input.
pub fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl LinearModel {
    pub fn new(weights: Vec<f64>, bias: f64, loss: LossKind, lambda: f64) -> Self {
        LinearModel {
            weights,
            bias,
            loss,
            lambda,
        }
    }

    pub fn zeros(dim: usize, loss: LossKind, lambda: f64) -> Self {
        LinearModel::new(vec![0.0; dim], 0.0, loss, lambda)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn loss(&self) -> LossKind {
        self.loss
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    fn check_dim(&self, x: &SparseVector) -> Result<(), LinearError> {
        if x.dim() != self.weights.len() {
            return Err(LinearError::DimensionMismatch {
                expected: self.weights.len(),
                found: x.dim(),
            });
        }
        Ok(())
    }

    /// Raw score `w·x + b`.
    pub fn decision(&self, x: &SparseVector) -> Result<f64, LinearError> {
        self.check_dim(x)?;
        Ok(x.dot_dense(&self.weights) + self.bias)
    }

    pub fn predict_proba(&self, x: &SparseVector) -> Result<f64, LinearError> {
        if self.loss != LossKind::Log {
            return Err(LinearError::WrongModelKind {
                expected: LossKind::Log,
                found: self.loss,
            });
        }
        Ok(sigmoid(self.decision(x)?))
    }

    /// Real iff the score is `>= 0`; a score of exactly zero is real.
    pub fn predict(&self, x: &SparseVector) -> Result<Label, LinearError> {
        Ok(label_for_score(self.decision(x)?))
    }

    /// `(1/n) Σ loss_i + (λ/2)‖w‖²` over a dataset.
    pub fn objective(&self, xs: &[SparseVector], ys: &[Label]) -> Result<f64, LinearError> {
        check_data(xs, ys, self.dim())?;
        let mut total = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            let s = x.dot_dense(&self.weights) + self.bias;
            total += match self.loss {
                LossKind::Log => softplus(-y.signed() * s),
                LossKind::Hinge => (1.0 - y.signed() * s).max(0.0),
            };
        }
        let reg: f64 = self.weights.iter().map(|w| w * w).sum();
        Ok(total / xs.len() as f64 + 0.5 * self.lambda * reg)
    }

    /// Gradient of [`LinearModel::objective`] as `(∂w, ∂b)`. For the hinge
    /// loss, points exactly on the margin take the zero subgradient.
    pub fn gradient(&self, xs: &[SparseVector], ys: &[Label]) -> Result<(Vec<f64>, f64), LinearError> {
        check_data(xs, ys, self.dim())?;
        let n = xs.len() as f64;
        let mut gw = vec![0.0; self.dim()];
        let mut gb = 0.0;
        for (x, &y) in xs.iter().zip(ys) {
            let s = x.dot_dense(&self.weights) + self.bias;
            let g = match self.loss {
                LossKind::Log => sigmoid(s) - y.as_f64(),
                LossKind::Hinge if y.signed() * s < 1.0 => -y.signed(),
                LossKind::Hinge => 0.0,
            };
            if g != 0.0 {
                for (i, v) in x.iter() {
                    gw[i] += g * v / n;
                }
                gb += g / n;
            }
        }
        for (g, w) in gw.iter_mut().zip(&self.weights) {
            *g += self.lambda * w;
        }
        Ok((gw, gb))
    }

    fn ensure_finite(&self, epoch: usize) -> Result<(), LinearError> {
        if self.bias.is_finite() && self.weights.iter().all(|w| w.is_finite()) {
            Ok(())
        } else {
            Err(LinearError::Diverged { epoch })
        }
    }
}

pub fn label_for_score(score: f64) -> Label {
    if score >= 0.0 {
        Label::Real
    } else {
        Label::Fake
    }
}

fn check_data(xs: &[SparseVector], ys: &[Label], dim: usize) -> Result<(), LinearError> {
    if xs.len() != ys.len() {
        return Err(LinearError::LengthMismatch {
            features: xs.len(),
            labels: ys.len(),
        });
    }
    if let Some(x) = xs.iter().find(|x| x.dim() != dim) {
        return Err(LinearError::DimensionMismatch {
            expected: dim,
            found: x.dim(),
        });
    }
    Ok(())
}

/// Checks the shared training preconditions and returns the feature dimension.
pub(crate) fn check_training_data(xs: &[SparseVector], ys: &[Label]) -> Result<usize, LinearError> {
    if xs.len() != ys.len() {
        return Err(LinearError::LengthMismatch {
            features: xs.len(),
            labels: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Err(LinearError::TooFewExamples(xs.len()));
    }
    let dim = xs[0].dim();
    check_data(xs, ys, dim)?;
    if ys.iter().all(|&y| y == ys[0]) {
        return Err(LinearError::SingleClassTraining);
    }
    Ok(dim)
}

/// Dense weights stored as `scale * v`, so the L2 shrink applied at every
/// step costs O(1) instead of O(dim).
#[derive(Debug, Clone)]
struct ScaledWeights {
    v: Vec<f64>,
    scale: f64,
}

impl ScaledWeights {
    fn zeros(dim: usize) -> Self {
        ScaledWeights {
            v: vec![0.0; dim],
            scale: 1.0,
        }
    }

    fn dot(&self, x: &SparseVector) -> f64 {
        self.scale * x.dot_dense(&self.v)
    }

    fn shrink(&mut self, factor: f64) {
        if factor == 0.0 {
            self.v.fill(0.0);
            self.scale = 1.0;
            return;
        }
        self.scale *= factor;
        if self.scale.abs() < 1e-9 {
            self.materialize();
        }
    }

    fn add(&mut self, x: &SparseVector, coef: f64) {
        let c = coef / self.scale;
        for (i, v) in x.iter() {
            self.v[i] += c * v;
        }
    }

    fn materialize(&mut self) {
        if self.scale != 1.0 {
            let s = self.scale;
            self.v.iter_mut().for_each(|w| *w *= s);
            self.scale = 1.0;
        }
    }

    fn into_vec(mut self) -> Vec<f64> {
        self.materialize();
        self.v
    }
}

/// Per-example (sub)gradient stepper shared by both linear trainers.
#[derive(Debug, Clone)]
pub struct SgdTrainer {
    weights: ScaledWeights,
    bias: f64,
    loss: LossKind,
    hyper: TrainHyper,
    step: u64,
}

impl SgdTrainer {
    pub fn new(dim: usize, loss: LossKind, hyper: TrainHyper) -> Result<Self, LinearError> {
        hyper.validate()?;
        if loss == LossKind::Log && hyper.learning_rate * hyper.lambda >= 1.0 {
            return Err(LinearError::InvalidHyper(
                "learning_rate * lambda must be < 1 for logistic regression".into(),
            ));
        }
        Ok(SgdTrainer {
            weights: ScaledWeights::zeros(dim),
            bias: 0.0,
            loss,
            hyper,
            step: 0,
        })
    }

    /// One stochastic update on a single example.
    pub fn step(&mut self, x: &SparseVector, y: Label) -> Result<(), LinearError> {
        if x.dim() != self.weights.v.len() {
            return Err(LinearError::DimensionMismatch {
                expected: self.weights.v.len(),
                found: x.dim(),
            });
        }
        self.step += 1;
        let score = self.weights.dot(x) + self.bias;
        let lambda = self.hyper.lambda;
        match self.loss {
            LossKind::Log => {
                let eta = self.hyper.learning_rate;
                let g = sigmoid(score) - y.as_f64();
                self.weights.shrink(1.0 - eta * lambda);
                if g != 0.0 {
                    self.weights.add(x, -eta * g);
                    self.bias -= eta * g;
                }
            }
            LossKind::Hinge => {
                let eta = if lambda > 0.0 {
                    1.0 / (lambda * self.step as f64)
                } else {
                    self.hyper.learning_rate
                };
                let t = y.signed();
                if lambda > 0.0 {
                    self.weights.shrink(1.0 - eta * lambda);
                }
                if t * score < 1.0 {
                    self.weights.add(x, eta * t);
                    self.bias += eta * t;
                }
            }
        }
        Ok(())
    }

    pub fn snapshot(&self) -> LinearModel {
        LinearModel::new(self.weights.clone().into_vec(), self.bias, self.loss, self.hyper.lambda)
    }

    pub fn finish(self) -> LinearModel {
        LinearModel::new(self.weights.into_vec(), self.bias, self.loss, self.hyper.lambda)
    }
}

fn train_sgd(xs: &[SparseVector], ys: &[Label], hyper: &TrainHyper, loss: LossKind) -> Result<LinearModel, LinearError> {
    let dim = check_training_data(xs, ys)?;
    let mut trainer = SgdTrainer::new(dim, loss, *hyper)?;
    let mut rng = rng::seeded(hyper.seed);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    for epoch in 1..=hyper.epochs {
        rng::shuffle(&mut order, &mut rng);
        for &i in &order {
            trainer.step(&xs[i], ys[i])?;
        }
        if !trainer.bias.is_finite() {
            return Err(LinearError::Diverged { epoch });
        }
    }
    let model = trainer.finish();
    model.ensure_finite(hyper.epochs)?;
    Ok(model)
}

pub fn train_logreg(xs: &[SparseVector], ys: &[Label], hyper: &TrainHyper) -> Result<LinearModel, LinearError> {
    train_sgd(xs, ys, hyper, LossKind::Log)
}

pub fn train_svm(xs: &[SparseVector], ys: &[Label], hyper: &TrainHyper) -> Result<LinearModel, LinearError> {
    train_sgd(xs, ys, hyper, LossKind::Hinge)
}

/// Plain full-batch gradient descent with a constant step. Returns the model
/// and the objective before the first step and after every epoch.
pub fn train_full_batch(
    xs: &[SparseVector],
    ys: &[Label],
    hyper: &TrainHyper,
    loss: LossKind,
) -> Result<(LinearModel, Vec<f64>), LinearError> {
    hyper.validate()?;
    let dim = check_training_data(xs, ys)?;
    let mut model = LinearModel::zeros(dim, loss, hyper.lambda);
    let mut history = vec![model.objective(xs, ys)?];
    for epoch in 1..=hyper.epochs {
        let (gw, gb) = model.gradient(xs, ys)?;
        for (w, g) in model.weights.iter_mut().zip(&gw) {
            *w -= hyper.learning_rate * g;
        }
        model.bias -= hyper.learning_rate * gb;
        model.ensure_finite(epoch)?;
        history.push(model.objective(xs, ys)?);
    }
    Ok((model, history))
}
