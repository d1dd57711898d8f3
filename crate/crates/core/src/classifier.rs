//! One-hidden-layer binary classifier, trained with Adam, an L2 penalty,
//! global gradient-norm clipping and mini-batches.
//!
//! The network is `y = σ(w2 · act(W1 x + b1) + b2)` with a square `M × M`
//! hidden layer. `act` is the identity unless configured otherwise.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::ingest::Label;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HiddenActivation {
    #[default]
    Identity,
    Relu,
    Tanh,
}

impl HiddenActivation {
    fn apply(self, z: f64) -> f64 {
        match self {
            HiddenActivation::Identity => z,
            HiddenActivation::Relu => z.max(0.0),
            HiddenActivation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `h`.
    fn derivative(self, z: f64, h: f64) -> f64 {
        match self {
            HiddenActivation::Identity => 1.0,
            HiddenActivation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            HiddenActivation::Tanh => 1.0 - h * h,
        }
    }
}

impl std::str::FromStr for HiddenActivation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" | "none" => Ok(HiddenActivation::Identity),
            "relu" => Ok(HiddenActivation::Relu),
            "tanh" => Ok(HiddenActivation::Tanh),
            other => Err(Error::InvalidInput(format!("unknown activation `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// L2 penalty coefficient; `weight_decay · θ` enters the gradient.
    pub weight_decay: f64,
    pub clip_norm: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    /// Stop after this many consecutive epochs improving by less than
    /// `min_improvement`.
    pub patience: usize,
    pub min_improvement: f64,
    pub hidden_activation: HiddenActivation,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            weight_decay: 0.005,
            clip_norm: 10.0,
            batch_size: 8,
            max_epochs: 25,
            seed: 0,
            patience: 3,
            min_improvement: 1e-4,
            hidden_activation: HiddenActivation::Identity,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = self.learning_rate > 0.0
            && self.weight_decay >= 0.0
            && self.clip_norm > 0.0
            && self.batch_size > 0
            && self.max_epochs > 0
            && self.patience > 0;
        if !positive {
            return Err(Error::InvalidInput(format!(
                "invalid training config {self:?}"
            )));
        }
        Ok(())
    }
}

/// Trained network. Parameters are stored flat as
/// `[W1 (row-major M×M), b1 (M), w2 (M), b2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FfnnModel {
    input_dim: usize,
    params: Vec<f64>,
    pub seed: u64,
    pub hidden_activation: HiddenActivation,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    input_dim: usize,
    seed: u64,
    hidden_activation: HiddenActivation,
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

impl FfnnModel {
    pub fn param_count(input_dim: usize) -> usize {
        input_dim * input_dim + 2 * input_dim + 1
    }

    pub fn zeros(input_dim: usize) -> Self {
        FfnnModel {
            input_dim,
            params: vec![0.0; Self::param_count(input_dim)],
            seed: 0,
            hidden_activation: HiddenActivation::Identity,
        }
    }

    /// Uniform initialization in `±1/√M` from a per-seed stream.
    pub fn init(input_dim: usize, seed: u64, activation: HiddenActivation) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (input_dim as f64).sqrt();
        let params = (0..Self::param_count(input_dim))
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        FfnnModel {
            input_dim,
            params,
            seed,
            hidden_activation: activation,
        }
    }

    pub fn from_parts(
        w1: &[f64],
        b1: &[f64],
        w2: &[f64],
        b2: f64,
        activation: HiddenActivation,
    ) -> Result<Self> {
        let m = b1.len();
        if w1.len() != m * m || w2.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m * m,
                actual: w1.len(),
            });
        }
        let mut params = Vec::with_capacity(Self::param_count(m));
        params.extend_from_slice(w1);
        params.extend_from_slice(b1);
        params.extend_from_slice(w2);
        params.push(b2);
        Ok(FfnnModel {
            input_dim: m,
            params,
            seed: 0,
            hidden_activation: activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn w1(&self) -> &[f64] {
        &self.params[..self.input_dim * self.input_dim]
    }

    pub fn b1(&self) -> &[f64] {
        let m = self.input_dim;
        &self.params[m * m..m * m + m]
    }

    pub fn w2(&self) -> &[f64] {
        let m = self.input_dim;
        &self.params[m * m + m..m * m + 2 * m]
    }

    pub fn b2(&self) -> f64 {
        self.params[self.params.len() - 1]
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Hidden pre-activations, activations and the output logit.
    fn forward_parts(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>, f64) {
        let m = self.input_dim;
        let (w1, b1, w2) = (self.w1(), self.b1(), self.w2());
        let mut z = b1.to_vec();
        for (i, zi) in z.iter_mut().enumerate() {
            let row = &w1[i * m..(i + 1) * m];
            *zi += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        let h: Vec<f64> = z.iter().map(|&v| self.hidden_activation.apply(v)).collect();
        let logit = self.b2() + w2.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>();
        (z, h, logit)
    }

    /// Output logit before the sigmoid.
    pub fn logit(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.forward_parts(x).2)
    }

    /// Probability that the answer is correct.
    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.logit(x)?))
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        Ok(if self.forward(x)? >= 0.5 {
            Label::Correct
        } else {
            Label::Incorrect
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let m = self.input_dim;
        let file = ModelFile {
            input_dim: m,
            seed: self.seed,
            hidden_activation: self.hidden_activation,
            w1: self.w1().chunks(m.max(1)).map(<[f64]>::to_vec).collect(),
            b1: self.b1().to_vec(),
            w2: self.w2().to_vec(),
            b2: self.b2(),
        };
        let text = serde_json::to_string(&file).map_err(|e| Error::json("model", e))?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let f: ModelFile =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        let w1: Vec<f64> = f.w1.concat();
        let mut model = FfnnModel::from_parts(&w1, &f.b1, &f.w2, f.b2, f.hidden_activation)?;
        if model.input_dim != f.input_dim || model.params.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "{}: inconsistent model",
                path.display()
            )));
        }
        model.seed = f.seed;
        Ok(model)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of `sigmoid(logit)` against `target`, computed
/// stably from the logit.
fn bce_with_logit(logit: f64, target: f64) -> f64 {
    logit.max(0.0) - logit * target + (-logit.abs()).exp().ln_1p()
}

/// Mean BCE over the batch plus `weight_decay / 2 · ‖θ‖²`, and its gradient
/// with respect to the flat parameter vector.
pub fn loss_and_gradient(
    model: &FfnnModel,
    xs: &[&[f64]],
    targets: &[f64],
    weight_decay: f64,
) -> (f64, Vec<f64>) {
    let m = model.input_dim;
    let n = xs.len() as f64;
    let mut grad = vec![0.0; model.params.len()];
    let mut loss = 0.0;
    let w2 = model.w2();
    let (off_b1, off_w2, off_b2) = (m * m, m * m + m, m * m + 2 * m);
    let mut dz = vec![0.0; m];

    for (x, &t) in xs.iter().zip(targets) {
        let (z, h, logit) = model.forward_parts(x);
        loss += bce_with_logit(logit, t);
        let g = (sigmoid(logit) - t) / n;
        grad[off_b2] += g;
        for i in 0..m {
            grad[off_w2 + i] += g * h[i];
            dz[i] = g * w2[i] * model.hidden_activation.derivative(z[i], h[i]);
            grad[off_b1 + i] += dz[i];
        }
        for i in 0..m {
            if dz[i] == 0.0 {
                continue;
            }
            let row = &mut grad[i * m..(i + 1) * m];
            for (gw, &xv) in row.iter_mut().zip(x.iter()) {
                *gw += dz[i] * xv;
            }
        }
    }
    loss /= n;

    if weight_decay > 0.0 {
        let mut sq = 0.0;
        for (gp, &p) in grad.iter_mut().zip(&model.params) {
            *gp += weight_decay * p;
            sq += p * p;
        }
        loss += 0.5 * weight_decay * sq;
    }
    (loss, grad)
}

/// Scales `grad` in place so its L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
pub fn clip_global_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= scale);
    }
    norm
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    fn new(n: usize, config: &TrainConfig) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
            lr: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            eps: config.epsilon,
        }
    }

    fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Training diagnostics.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Full-training-set loss (penalty included) after each epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
    pub clip_events: usize,
    /// Largest gradient norm after clipping over steps where clipping fired.
    pub max_clipped_norm: f64,
}

fn dataset(features: &[FeatureVector]) -> Result<(usize, Vec<&[f64]>, Vec<f64>)> {
    let first = features
        .first()
        .ok_or_else(|| Error::InvalidInput("no training examples".into()))?;
    let dim = first.dim();
    let mut xs = Vec::with_capacity(features.len());
    let mut ys = Vec::with_capacity(features.len());
    for f in features {
        if f.dim() != dim {
            return Err(Error::record(
                &f.example_id,
                format!("feature dimension {} differs from {dim}", f.dim()),
            ));
        }
        let label = f
            .label
            .ok_or_else(|| Error::MissingLabel(f.example_id.clone()))?;
        xs.push(f.values.as_slice());
        ys.push(label.as_target());
    }
    Ok((dim, xs, ys))
}

/// Trains a model; deterministic given `config.seed`.
pub fn train(features: &[FeatureVector], config: &TrainConfig) -> Result<FfnnModel> {
    Ok(train_with_report(features, config)?.0)
}

pub fn train_with_report(
    features: &[FeatureVector],
    config: &TrainConfig,
) -> Result<(FfnnModel, TrainReport)> {
    config.validate()?;
    let (dim, xs, ys) = dataset(features)?;
    let positives = ys.iter().filter(|&&y| y == 1.0).count();
    if positives == 0 || positives == ys.len() {
        return Err(Error::InvalidInput(
            "training set must contain both correct and incorrect examples".into(),
        ));
    }

    let mut model = FfnnModel::init(dim, config.seed, config.hidden_activation);
    let mut adam = Adam::new(model.params.len(), config);
    // Offset keeps the shuffling stream independent of the init stream.
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9E37_79B9_7F4A_7C15);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut report = TrainReport::default();
    let mut best = f64::INFINITY;
    let mut stale = 0usize;

    for _ in 0..config.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let bx: Vec<&[f64]> = batch.iter().map(|&i| xs[i]).collect();
            let by: Vec<f64> = batch.iter().map(|&i| ys[i]).collect();
            let (_, mut grad) = loss_and_gradient(&model, &bx, &by, config.weight_decay);
            let pre = clip_global_norm(&mut grad, config.clip_norm);
            if pre > config.clip_norm {
                report.clip_events += 1;
                let post = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                report.max_clipped_norm = report.max_clipped_norm.max(post);
            }
            adam.update(&mut model.params, &grad);
            report.steps += 1;
        }
        let (loss, _) = loss_and_gradient(&model, &xs, &ys, config.weight_decay);
        report.epoch_losses.push(loss);
        if best - loss < config.min_improvement {
            stale += 1;
        } else {
            stale = 0;
        }
        best = best.min(loss);
        if stale >= config.patience {
            break;
        }
    }
    if model.params.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidInput("training diverged".into()));
    }
    Ok((model, report))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Binary classification scores. The confusion matrix is indexed
/// `[gold][predicted]` with index 0 = correct, 1 = incorrect.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub macro_f1: f64,
    pub accuracy: f64,
    pub correct: ClassMetrics,
    pub incorrect: ClassMetrics,
    pub confusion_matrix: [[usize; 2]; 2],
}

fn class_index(l: Label) -> usize {
    match l {
        Label::Correct => 0,
        Label::Incorrect => 1,
    }
}

fn safe_div(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

/// Scores predictions against gold labels.
pub fn metrics_from_predictions(predicted: &[Label], gold: &[Label]) -> Result<Metrics> {
    if predicted.is_empty() || predicted.len() != gold.len() {
        return Err(Error::InvalidInput(format!(
            "need equally many predictions and labels, got {} and {}",
            predicted.len(),
            gold.len()
        )));
    }
    let mut cm = [[0usize; 2]; 2];
    for (&p, &g) in predicted.iter().zip(gold) {
        cm[class_index(g)][class_index(p)] += 1;
    }
    let per_class = |k: usize| {
        let tp = cm[k][k] as f64;
        let predicted_k = (cm[0][k] + cm[1][k]) as f64;
        let gold_k = (cm[k][0] + cm[k][1]) as f64;
        let precision = safe_div(tp, predicted_k);
        let recall = safe_div(tp, gold_k);
        ClassMetrics {
            precision,
            recall,
            f1: safe_div(2.0 * precision * recall, precision + recall),
            support: gold_k as usize,
        }
    };
    let correct = per_class(0);
    let incorrect = per_class(1);
    Ok(Metrics {
        macro_f1: (correct.f1 + incorrect.f1) / 2.0,
        accuracy: (cm[0][0] + cm[1][1]) as f64 / predicted.len() as f64,
        correct,
        incorrect,
        confusion_matrix: cm,
    })
}

/// Thresholds the model at 0.5 and scores it.
pub fn evaluate(model: &FfnnModel, features: &[FeatureVector]) -> Result<Metrics> {
    if features.is_empty() {
        return Err(Error::InvalidInput("empty evaluation set".into()));
    }
    let mut predicted = Vec::with_capacity(features.len());
    let mut gold = Vec::with_capacity(features.len());
    for f in features {
        predicted.push(model.predict(&f.values)?);
        gold.push(
            f.label
                .ok_or_else(|| Error::MissingLabel(f.example_id.clone()))?,
        );
    }
    metrics_from_predictions(&predicted, &gold)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AveragedMetrics {
    pub macro_f1: f64,
    pub accuracy: f64,
    pub f1_correct: f64,
    pub f1_incorrect: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub metrics: Metrics,
    pub epochs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRuns {
    pub averaged: AveragedMetrics,
    pub per_seed: Vec<SeedResult>,
}

/// Arithmetic mean of the per-seed scores.
pub fn average(per_seed: &[Metrics]) -> AveragedMetrics {
    let n = per_seed.len().max(1) as f64;
    let sum = |f: &dyn Fn(&Metrics) -> f64| per_seed.iter().map(f).sum::<f64>() / n;
    AveragedMetrics {
        macro_f1: sum(&|m| m.macro_f1),
        accuracy: sum(&|m| m.accuracy),
        f1_correct: sum(&|m| m.correct.f1),
        f1_incorrect: sum(&|m| m.incorrect.f1),
    }
}

/// Trains and evaluates once per seed; returns the averaged and per-seed
/// scores along with the trained models.
pub fn run_seeds(
    train_set: &[FeatureVector],
    test_set: &[FeatureVector],
    config: &TrainConfig,
    seeds: &[u64],
) -> Result<(SeedRuns, Vec<FfnnModel>)> {
    if seeds.is_empty() || train_set.is_empty() || test_set.is_empty() {
        return Err(Error::InvalidInput(
            "need seeds and non-empty splits".into(),
        ));
    }
    let mut per_seed = Vec::with_capacity(seeds.len());
    let mut models = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let cfg = TrainConfig {
            seed,
            ..config.clone()
        };
        let (model, report) = train_with_report(train_set, &cfg)?;
        let metrics = evaluate(&model, test_set)?;
        per_seed.push(SeedResult {
            seed,
            metrics,
            epochs: report.epoch_losses.len(),
        });
        models.push(model);
    }
    let all: Vec<Metrics> = per_seed.iter().map(|r| r.metrics.clone()).collect();
    Ok((
        SeedRuns {
            averaged: average(&all),
            per_seed,
        },
        models,
    ))
}

/// Scores the constant majority-class predictor.
pub fn majority_baseline(train_labels: &[Label], test_labels: &[Label]) -> Result<Metrics> {
    let class = crate::features::majority_predict(train_labels)?;
    metrics_from_predictions(&vec![class; test_labels.len()], test_labels)
}
