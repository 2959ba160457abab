//! Feedforward network for binary classification: affine + ReLU hidden
//! layers, a single sigmoid output, binary cross-entropy loss with optional
//! L2 penalty on the weight matrices and inverted dropout on hidden layers.
//!
//! Weight matrices are stored input-major: layer `l` holds `in × out` values
//! where row `i` is the fan-out of input unit `i`. A sparse input therefore
//! touches only the rows of its nonzero entries, both forward and backward.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;
use crate::linear::{check_training_data, label_for_score, sigmoid, LinearError};
use crate::rng::{self, PipelineRng};
use crate::sparse::SparseVector;

/// Probabilities are clipped to `[EPS, 1 - EPS]` inside the loss.
pub const PROB_EPS: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum NeuralError {
    #[error("dimension mismatch: network expects {expected} inputs, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("activation cache does not belong to the current parameters")]
    StaleCache,
    #[error("training labels contain a single class")]
    SingleClassTraining,
    #[error("invalid training data: {0}")]
    InvalidData(String),
    #[error("invalid network hyperparameters: {0}")]
    InvalidHyper(String),
    #[error("training diverged in epoch {epoch} (mean batch loss {loss}, learning rate {learning_rate})")]
    DivergedTraining { epoch: usize, loss: f64, learning_rate: f64 },
    #[error("malformed network: {0}")]
    Malformed(String),
}

impl From<LinearError> for NeuralError {
    fn from(e: LinearError) -> Self {
        match e {
            LinearError::SingleClassTraining => NeuralError::SingleClassTraining,
            other => NeuralError::InvalidData(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpHyper {
    pub hidden_dims: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout_rate: f64,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for MlpHyper {
    fn default() -> Self {
        MlpHyper::baseline()
    }
}

impl MlpHyper {
    /// No dropout, no weight penalty.
    pub fn baseline() -> Self {
        MlpHyper {
            hidden_dims: vec![128],
            learning_rate: 0.5,
            epochs: 10,
            batch_size: 32,
            dropout_rate: 0.0,
            lambda: 0.0,
            seed: 42,
        }
    }

    /// Dropout 0.5 on hidden units and L2 strength 1e-4.
    pub fn regularized() -> Self {
        MlpHyper {
            dropout_rate: 0.5,
            lambda: 1e-4,
            ..MlpHyper::baseline()
        }
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        let bad = |m: String| Err(NeuralError::InvalidHyper(m));
        if self.hidden_dims.iter().any(|&h| h == 0) {
            return bad("hidden layer widths must be >= 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} must be > 0", self.learning_rate));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} must lie in [0, 1)", self.dropout_rate));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda {} must be >= 0", self.lambda));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layer_dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    dropout_rate: f64,
    lambda: f64,
    generation: u64,
}

/// Forward-pass mode. Training mode draws dropout masks from the generator.
pub enum Mode<'a> {
    Infer,
    Train(&'a mut PipelineRng),
}

/// Everything [`MlpModel::backward`] needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    generation: u64,
    input: SparseVector,
    /// Hidden pre-activations per hidden layer.
    pre: Vec<Vec<f64>>,
    /// Hidden outputs after ReLU and dropout.
    hidden: Vec<Vec<f64>>,
    /// Dropout multipliers (0 or 1/(1-p)); empty when no mask was drawn.
    masks: Vec<Vec<f64>>,
    output: f64,
}

impl ForwardCache {
    pub fn output(&self) -> f64 {
        self.output
    }

    pub fn hidden_activations(&self) -> &[Vec<f64>] {
        &self.hidden
    }

    pub fn pre_activations(&self) -> &[Vec<f64>] {
        &self.pre
    }
}

/// Parameter gradients, shaped like the model's weights and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Gradient sums over a mini-batch. The first layer's gradient is sparse in
/// its rows, so touched rows are tracked and only they are reset.
struct Accumulator {
    grads: Gradients,
    touched: Vec<usize>,
    row_seen: Vec<bool>,
}

impl Accumulator {
    fn new(model: &MlpModel) -> Self {
        Accumulator {
            grads: Gradients {
                weights: model.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
                biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            },
            touched: Vec::new(),
            row_seen: vec![false; model.layer_dims[0]],
        }
    }

    fn clear(&mut self, first_width: usize) {
        for &r in &self.touched {
            self.grads.weights[0][r * first_width..(r + 1) * first_width].fill(0.0);
            self.row_seen[r] = false;
        }
        self.touched.clear();
        for w in &mut self.grads.weights[1..] {
            w.fill(0.0);
        }
        for b in &mut self.grads.biases {
            b.fill(0.0);
        }
    }
}

fn glorot_limit(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn bce(p: f64, y: f64) -> f64 {
    let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

impl MlpModel {
    /// Glorot-uniform weights drawn layer by layer in storage order; zero biases.
    pub fn init(input_dim: usize, hyper: &MlpHyper, rng: &mut PipelineRng) -> Self {
        let mut layer_dims = vec![input_dim];
        layer_dims.extend(&hyper.hidden_dims);
        layer_dims.push(1);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in layer_dims.windows(2) {
            let limit = glorot_limit(w[0], w[1]);
            weights.push((0..w[0] * w[1]).map(|_| rng.gen_range(-limit..limit)).collect());
            biases.push(vec![0.0; w[1]]);
        }
        MlpModel {
            layer_dims,
            weights,
            biases,
            dropout_rate: hyper.dropout_rate,
            lambda: hyper.lambda,
            generation: 0,
        }
    }

    pub fn zeros(layer_dims: Vec<usize>, dropout_rate: f64, lambda: f64) -> Result<Self, NeuralError> {
        let weights = layer_dims.windows(2).map(|w| vec![0.0; w[0] * w[1]]).collect();
        let biases = layer_dims.iter().skip(1).map(|&d| vec![0.0; d]).collect();
        MlpModel::from_parts(layer_dims, weights, biases, dropout_rate, lambda)
    }

    pub fn from_parts(
        layer_dims: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
        dropout_rate: f64,
        lambda: f64,
    ) -> Result<Self, NeuralError> {
        if layer_dims.len() < 2 || *layer_dims.last().unwrap() != 1 {
            return Err(NeuralError::Malformed(format!("layer dims {layer_dims:?} must end in 1")));
        }
        if layer_dims.iter().any(|&d| d == 0) {
            return Err(NeuralError::Malformed("zero-width layer".into()));
        }
        let n = layer_dims.len() - 1;
        if weights.len() != n || biases.len() != n {
            return Err(NeuralError::Malformed(format!(
                "{n} layers but {} weight and {} bias blocks",
                weights.len(),
                biases.len()
            )));
        }
        for (l, w) in layer_dims.windows(2).enumerate() {
            if weights[l].len() != w[0] * w[1] || biases[l].len() != w[1] {
                return Err(NeuralError::Malformed(format!("layer {l} shape does not chain")));
            }
        }
        if !(0.0..1.0).contains(&dropout_rate) || !(lambda >= 0.0) {
            return Err(NeuralError::Malformed("dropout or lambda out of range".into()));
        }
        Ok(MlpModel {
            layer_dims,
            weights,
            biases,
            dropout_rate,
            lambda,
            generation: 0,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    /// Mutable parameter access. Invalidates outstanding forward caches.
    pub fn params_mut(&mut self) -> (&mut [Vec<f64>], &mut [Vec<f64>]) {
        self.generation += 1;
        (&mut self.weights, &mut self.biases)
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    /// `Σ_l ‖W_l‖²` over weight matrices (biases excluded).
    pub fn weight_sq_norm(&self) -> f64 {
        self.weights.iter().flatten().map(|w| w * w).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(&self.biases).flatten().all(|v| v.is_finite())
    }

    pub fn forward(&self, x: &SparseVector, mode: Mode<'_>) -> Result<ForwardCache, NeuralError> {
        if x.dim() != self.input_dim() {
            return Err(NeuralError::DimensionMismatch {
                expected: self.input_dim(),
                found: x.dim(),
            });
        }
        let mut rng = match mode {
            Mode::Train(rng) if self.dropout_rate > 0.0 => Some(rng),
            _ => None,
        };
        let keep_scale = 1.0 / (1.0 - self.dropout_rate);
        let n_layers = self.weights.len();
        let mut pre = Vec::with_capacity(n_layers - 1);
        let mut hidden: Vec<Vec<f64>> = Vec::with_capacity(n_layers - 1);
        let mut masks = Vec::new();
        let mut output = 0.0;

        for l in 0..n_layers {
            let width = self.layer_dims[l + 1];
            let w = &self.weights[l];
            let mut z = self.biases[l].clone();
            if l == 0 {
                for (i, v) in x.iter() {
                    let row = &w[i * width..(i + 1) * width];
                    for (zj, wij) in z.iter_mut().zip(row) {
                        *zj += v * wij;
                    }
                }
            } else {
                for (i, &a) in hidden[l - 1].iter().enumerate() {
                    if a != 0.0 {
                        let row = &w[i * width..(i + 1) * width];
                        for (zj, wij) in z.iter_mut().zip(row) {
                            *zj += a * wij;
                        }
                    }
                }
            }
            if l + 1 == n_layers {
                output = sigmoid(z[0]);
            } else {
                let mut a: Vec<f64> = z.iter().map(|&v| v.max(0.0)).collect();
                if let Some(rng) = rng.as_deref_mut() {
                    let mask: Vec<f64> = (0..width)
                        .map(|_| {
                            if rng.gen::<f64>() >= self.dropout_rate {
                                keep_scale
                            } else {
                                0.0
                            }
                        })
                        .collect();
                    for (aj, mj) in a.iter_mut().zip(&mask) {
                        *aj *= mj;
                    }
                    masks.push(mask);
                }
                pre.push(z);
                hidden.push(a);
            }
        }
        Ok(ForwardCache {
            generation: self.generation,
            input: x.clone(),
            pre,
            hidden,
            masks,
            output,
        })
    }

    fn check_cache(&self, cache: &ForwardCache) -> Result<(), NeuralError> {
        if cache.generation != self.generation
            || cache.input.dim() != self.input_dim()
            || cache.hidden.len() + 1 != self.weights.len()
        {
            return Err(NeuralError::StaleCache);
        }
        Ok(())
    }

    /// Adds `scale ×` the data gradient of one example into `acc`.
    fn accumulate(&self, cache: &ForwardCache, y: Label, scale: f64, acc: &mut Accumulator) {
        let n_layers = self.weights.len();
        let mut delta = vec![(cache.output - y.as_f64()) * scale];
        for l in (0..n_layers).rev() {
            let width = self.layer_dims[l + 1];
            let gw = &mut acc.grads.weights[l];
            for (gb, d) in acc.grads.biases[l].iter_mut().zip(&delta) {
                *gb += d;
            }
            if l == 0 {
                for (i, v) in cache.input.iter() {
                    if !acc.row_seen[i] {
                        acc.row_seen[i] = true;
                        acc.touched.push(i);
                    }
                    let row = &mut gw[i * width..(i + 1) * width];
                    for (g, d) in row.iter_mut().zip(&delta) {
                        *g += v * d;
                    }
                }
                break;
            }
            let prev = &cache.hidden[l - 1];
            for (i, &a) in prev.iter().enumerate() {
                if a != 0.0 {
                    let row = &mut gw[i * width..(i + 1) * width];
                    for (g, d) in row.iter_mut().zip(&delta) {
                        *g += a * d;
                    }
                }
            }
            // Propagate to the previous hidden layer through ReLU and dropout.
            let w = &self.weights[l];
            let mask = cache.masks.get(l - 1);
            let z = &cache.pre[l - 1];
            delta = (0..self.layer_dims[l])
                .map(|i| {
                    if z[i] <= 0.0 {
                        return 0.0;
                    }
                    let m = mask.map_or(1.0, |m| m[i]);
                    if m == 0.0 {
                        return 0.0;
                    }
                    let row = &w[i * width..(i + 1) * width];
                    m * row.iter().zip(&delta).map(|(wij, d)| wij * d).sum::<f64>()
                })
                .collect();
        }
    }

    /// Gradient of `BCE(output, y) + (λ/2) Σ‖W_l‖²` for the example cached by
    /// a forward pass on the current parameters. Dropout masks recorded in the
    /// cache are reused.
    pub fn backward(&self, cache: &ForwardCache, y: Label) -> Result<Gradients, NeuralError> {
        self.check_cache(cache)?;
        let mut acc = Accumulator::new(self);
        self.accumulate(cache, y, 1.0, &mut acc);
        let mut grads = acc.grads;
        if self.lambda > 0.0 {
            for (g, w) in grads.weights.iter_mut().zip(&self.weights) {
                for (gi, wi) in g.iter_mut().zip(w) {
                    *gi += self.lambda * wi;
                }
            }
        }
        Ok(grads)
    }

    /// Mean cross-entropy in inference mode plus the L2 penalty.
    pub fn objective(&self, xs: &[SparseVector], ys: &[Label]) -> Result<f64, NeuralError> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(NeuralError::InvalidData(format!("{} vectors, {} labels", xs.len(), ys.len())));
        }
        let mut total = 0.0;
        for (x, y) in xs.iter().zip(ys) {
            total += bce(self.forward(x, Mode::Infer)?.output, y.as_f64());
        }
        Ok(total / xs.len() as f64 + 0.5 * self.lambda * self.weight_sq_norm())
    }

    /// Inference-mode probability of real, and the label (`p >= 0.5` is real).
    pub fn predict(&self, x: &SparseVector) -> Result<(Label, f64), NeuralError> {
        let p = self.forward(x, Mode::Infer)?.output;
        Ok((label_for_probability(p), p))
    }

    /// SGD update `W ← W − η (g + λW)`, `b ← b − η g_b`.
    fn apply(&mut self, acc: &Accumulator, learning_rate: f64) {
        self.generation += 1;
        let decay = 1.0 - learning_rate * self.lambda;
        let first_width = self.layer_dims[1];
        for l in 0..self.weights.len() {
            let w = &mut self.weights[l];
            let g = &acc.grads.weights[l];
            if self.lambda > 0.0 {
                w.iter_mut().for_each(|wi| *wi *= decay);
            }
            if l == 0 {
                for &r in &acc.touched {
                    let range = r * first_width..(r + 1) * first_width;
                    for (wi, gi) in w[range.clone()].iter_mut().zip(&g[range]) {
                        *wi -= learning_rate * gi;
                    }
                }
            } else {
                for (wi, gi) in w.iter_mut().zip(g) {
                    *wi -= learning_rate * gi;
                }
            }
            for (bi, gi) in self.biases[l].iter_mut().zip(&acc.grads.biases[l]) {
                *bi -= learning_rate * gi;
            }
        }
    }
}

pub fn label_for_probability(p: f64) -> Label {
    label_for_score(p - 0.5)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean training-mode loss (without penalty) over each epoch's batches,
    /// evaluated before each batch's update.
    pub epoch_losses: Vec<f64>,
}

pub fn train_mlp(xs: &[SparseVector], ys: &[Label], hyper: &MlpHyper) -> Result<MlpModel, NeuralError> {
    train_mlp_with_report(xs, ys, hyper).map(|(m, _)| m)
}

/// Mini-batch SGD. One generator, seeded from `hyper.seed`, supplies the
/// initial weights, then each epoch's shuffle and dropout masks in order.
pub fn train_mlp_with_report(
    xs: &[SparseVector],
    ys: &[Label],
    hyper: &MlpHyper,
) -> Result<(MlpModel, TrainReport), NeuralError> {
    hyper.validate()?;
    let dim = check_training_data(xs, ys)?;
    let mut rng = rng::seeded(hyper.seed);
    let mut model = MlpModel::init(dim, hyper, &mut rng);
    let mut acc = Accumulator::new(&model);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut epoch_losses = Vec::with_capacity(hyper.epochs);
    let first_width = model.layer_dims[1];

    for epoch in 1..=hyper.epochs {
        rng::shuffle(&mut order, &mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(hyper.batch_size) {
            acc.clear(first_width);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let cache = model.forward(&xs[i], Mode::Train(&mut rng))?;
                loss_sum += bce(cache.output, ys[i].as_f64());
                model.accumulate(&cache, ys[i], scale, &mut acc);
            }
            model.apply(&acc, hyper.learning_rate);
        }
        let mean = loss_sum / xs.len() as f64;
        if !mean.is_finite() || !model.is_finite() {
            return Err(NeuralError::DivergedTraining {
                epoch,
                loss: mean,
                learning_rate: hyper.learning_rate,
            });
        }
        epoch_losses.push(mean);
    }
    Ok((model, TrainReport { epoch_losses }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> MlpModel {
        // 2-3-1 with hand-set parameters.
        MlpModel::from_parts(
            vec![2, 3, 1],
            vec![vec![0.5, -1.0, 0.25, 2.0, 0.5, -0.75], vec![1.5, -2.0, 0.5]],
            vec![vec![0.1, 0.2, -0.3], vec![0.05]],
            0.0,
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn zero_network_outputs_half() {
        let m = MlpModel::zeros(vec![4, 3, 1], 0.0, 0.0).unwrap();
        let x = SparseVector::from_dense(&[1.0, 0.0, 2.0, -1.0]);
        assert_eq!(m.forward(&x, Mode::Infer).unwrap().output(), 0.5);
        assert_eq!(m.predict(&x).unwrap(), (Label::Real, 0.5));
    }

    #[test]
    fn hand_forward() {
        let x = SparseVector::from_dense(&[1.0, 2.0]);
        // z = W^T x + b with W rows per input.
        let z = [0.5 * 1.0 + 2.0 * 2.0 + 0.1, -1.0 * 1.0 + 0.5 * 2.0 + 0.2, 0.25 * 1.0 - 0.75 * 2.0 - 0.3];
        let a: Vec<f64> = z.iter().map(|v: &f64| v.max(0.0)).collect();
        let out = 1.5 * a[0] - 2.0 * a[1] + 0.5 * a[2] + 0.05;
        let expected = 1.0 / (1.0 + (-out).exp());
        let got = tiny().forward(&x, Mode::Infer).unwrap().output();
        assert!((got - expected).abs() < 1e-10);
    }

    #[test]
    fn zero_dropout_train_equals_infer() {
        let x = SparseVector::from_dense(&[0.3, -0.7]);
        let m = tiny();
        let mut rng = rng::seeded(5);
        let t = m.forward(&x, Mode::Train(&mut rng)).unwrap().output();
        assert_eq!(t, m.forward(&x, Mode::Infer).unwrap().output());
    }

    #[test]
    fn dimension_mismatch() {
        let err = tiny().forward(&SparseVector::zeros(3), Mode::Infer).unwrap_err();
        assert_eq!(err, NeuralError::DimensionMismatch { expected: 2, found: 3 });
    }

    #[test]
    fn stale_cache_rejected() {
        let mut m = tiny();
        let cache = m.forward(&SparseVector::from_dense(&[1.0, 1.0]), Mode::Infer).unwrap();
        m.params_mut().1[1][0] = 0.0;
        assert_eq!(m.backward(&cache, Label::Real).unwrap_err(), NeuralError::StaleCache);
    }

    #[test]
    fn confident_correct_prediction_has_tiny_output_gradient() {
        let mut m = tiny();
        m.params_mut().1[1][0] = 30.0;
        let x = SparseVector::from_dense(&[1.0, 2.0]);
        let g = m.backward(&m.forward(&x, Mode::Infer).unwrap(), Label::Real).unwrap();
        assert!(g.biases[1][0].abs() < 1e-12);
        assert!(g.weights[1].iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn saturated_output_leaves_only_penalty() {
        let mut m = MlpModel::from_parts(
            vec![2, 3, 1],
            tiny().weights().to_vec(),
            tiny().biases().to_vec(),
            0.0,
            0.01,
        )
        .unwrap();
        m.params_mut().1[1][0] = 800.0;
        let x = SparseVector::from_dense(&[1.0, 2.0]);
        let cache = m.forward(&x, Mode::Infer).unwrap();
        assert_eq!(cache.output(), 1.0);
        let g = m.backward(&cache, Label::Real).unwrap();
        for (gl, wl) in g.weights.iter().zip(m.weights()) {
            for (gi, wi) in gl.iter().zip(wl) {
                assert_eq!(*gi, 0.01 * wi);
            }
        }
        assert!(g.biases.iter().flatten().all(|&b| b == 0.0));
    }

    #[test]
    fn rejects_bad_hyper() {
        let h = MlpHyper {
            dropout_rate: 1.0,
            ..MlpHyper::baseline()
        };
        assert!(matches!(h.validate(), Err(NeuralError::InvalidHyper(_))));
    }

    #[test]
    fn presets() {
        let r = MlpHyper::regularized();
        assert_eq!((r.dropout_rate, r.lambda), (0.5, 1e-4));
        let b = MlpHyper::baseline();
        assert_eq!((b.dropout_rate, b.lambda), (0.0, 0.0));
        assert_eq!(b.hidden_dims, vec![128]);
    }

    #[test]
    fn probability_tie_is_real() {
        assert_eq!(label_for_probability(0.5), Label::Real);
        assert_eq!(label_for_probability(0.4999), Label::Fake);
    }
}
