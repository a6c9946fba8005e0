//! Desk-scale multiclass logistic task: Gaussian class-conditional data,
//! optional label flipping, full-batch gradient-descent training, and
//! per-example gradient extraction in natural d x C block form.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::estimators::{BlockSpec, GradientDump};
use crate::fisher::GradientBlock;
use crate::linalg::{frobenius_norm, DenseMatrix};

#[derive(Debug, Clone)]
pub struct ToyTask {
    pub n_train: usize,
    pub n_val: usize,
    pub input_dim: usize,
    pub classes: usize,
    pub class_separation: f64,
    pub flip_fraction: f64,
    pub seed: u64,
}

impl Default for ToyTask {
    fn default() -> Self {
        Self {
            n_train: 500,
            n_val: 200,
            input_dim: 20,
            classes: 2,
            class_separation: 3.0,
            flip_fraction: 0.2,
            seed: 0,
        }
    }
}

impl ToyTask {
    pub fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::InvalidConfig("classes must be >= 2".into()));
        }
        if !(0.0..1.0).contains(&self.flip_fraction) {
            return Err(Error::InvalidConfig(
                "flip_fraction must be in [0, 1)".into(),
            ));
        }
        if self.classes > self.input_dim {
            return Err(Error::InvalidConfig(
                "classes must not exceed input_dim (axis-aligned class means)".into(),
            ));
        }
        if self.n_train == 0 || self.n_val == 0 {
            return Err(Error::InvalidConfig("need at least one example".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_steps: usize,
    pub grad_norm_tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            max_steps: 5000,
            grad_norm_tol: 1e-4,
        }
    }
}

/// A labelled design matrix (rows are examples).
#[derive(Debug, Clone)]
pub struct Split {
    pub features: DenseMatrix,
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ToyOutcome {
    /// Trained weights, d x C.
    pub weights: DenseMatrix,
    /// Per-example training gradients plus the clean-validation average, one
    /// block named "w".
    pub dump: GradientDump,
    /// Indices of training examples whose labels were flipped.
    pub flipped: Vec<usize>,
    /// Labels the model was trained on (flips applied).
    pub corrupted_labels: Vec<usize>,
    pub train: Split,
    pub val: Split,
    pub test: Split,
    pub final_grad_norm: f64,
    pub steps: usize,
    pub converged: bool,
    pub loss_history: Vec<f64>,
}

fn sample_split(
    rng: &mut ChaCha8Rng,
    n: usize,
    d: usize,
    classes: usize,
    separation: f64,
) -> Split {
    let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..classes)).collect();
    let features = DenseMatrix::from_fn(n, d, |i, j| {
        let noise: f64 = StandardNormal.sample(rng);
        if j == labels[i] {
            separation + noise
        } else {
            noise
        }
    });
    Split { features, labels }
}

pub fn softmax_probs(features: &DenseMatrix, weights: &DenseMatrix) -> Result<DenseMatrix> {
    let logits = crate::linalg::matmul(features, weights)?;
    let n = logits.rows();
    let c = logits.cols();
    let mut out = logits;
    for i in 0..n {
        let row = out.row_mut(i);
        let m = row.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
        let mut z = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            z += *v;
        }
        for v in row.iter_mut() {
            *v /= z;
        }
    }
    let _ = c;
    Ok(out)
}

/// Mean negative log-likelihood.
pub fn nll_loss(probs: &DenseMatrix, labels: &[usize]) -> f64 {
    let n = probs.rows();
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        total -= probs.get(i, y).max(1e-300).ln();
    }
    total / n as f64
}

/// Mean gradient `X^T (P - Y) / n`, d x C.
pub fn nll_gradient(features: &DenseMatrix, probs: &DenseMatrix, labels: &[usize]) -> DenseMatrix {
    let n = features.rows();
    let d = features.cols();
    let c = probs.cols();
    let mut grad = DenseMatrix::zeros(d, c);
    for i in 0..n {
        let x = features.row(i);
        for k in 0..c {
            let resid = probs.get(i, k) - if labels[i] == k { 1.0 } else { 0.0 };
            if resid != 0.0 {
                for j in 0..d {
                    grad.set(j, k, grad.get(j, k) + x[j] * resid);
                }
            }
        }
    }
    grad.scaled(1.0 / n as f64)
}

pub fn accuracy(features: &DenseMatrix, labels: &[usize], weights: &DenseMatrix) -> Result<f64> {
    let probs = softmax_probs(features, weights)?;
    let mut hits = 0usize;
    for (i, &y) in labels.iter().enumerate() {
        let row = probs.row(i);
        let pred = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(j, _)| j)
            .unwrap();
        if pred == y {
            hits += 1;
        }
    }
    Ok(hits as f64 / labels.len() as f64)
}

/// Trains W from zero by full-batch gradient descent until the gradient norm
/// drops below tolerance or the step limit is hit.
pub fn fit_logistic(
    features: &DenseMatrix,
    labels: &[usize],
    classes: usize,
    cfg: &TrainConfig,
) -> Result<(DenseMatrix, f64, usize, Vec<f64>)> {
    let d = features.cols();
    let mut w = DenseMatrix::zeros(d, classes);
    let mut losses = Vec::new();
    let mut grad_norm = f64::INFINITY;
    let mut steps = 0;
    for _ in 0..cfg.max_steps {
        let probs = softmax_probs(features, &w)?;
        losses.push(nll_loss(&probs, labels));
        let grad = nll_gradient(features, &probs, labels);
        grad_norm = frobenius_norm(&grad);
        if grad_norm <= cfg.grad_norm_tol {
            break;
        }
        for i in 0..d {
            for k in 0..classes {
                w.set(i, k, w.get(i, k) - cfg.learning_rate * grad.get(i, k));
            }
        }
        steps += 1;
    }
    Ok((w, grad_norm, steps, losses))
}

/// Generates the task data, flips the requested fraction of training labels,
/// trains, and emits the gradient dump. Non-convergence is not an error; the
/// final gradient norm is reported in the outcome.
pub fn train_toy_model(task: &ToyTask) -> Result<ToyOutcome> {
    train_toy_model_with(task, &TrainConfig::default())
}

pub fn train_toy_model_with(task: &ToyTask, cfg: &TrainConfig) -> Result<ToyOutcome> {
    task.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(task.seed);
    let train = sample_split(
        &mut rng,
        task.n_train,
        task.input_dim,
        task.classes,
        task.class_separation,
    );
    let val = sample_split(
        &mut rng,
        task.n_val,
        task.input_dim,
        task.classes,
        task.class_separation,
    );
    let test = sample_split(
        &mut rng,
        task.n_val,
        task.input_dim,
        task.classes,
        task.class_separation,
    );

    let n_flip = (task.flip_fraction * task.n_train as f64).round() as usize;
    let mut order: Vec<usize> = (0..task.n_train).collect();
    order.shuffle(&mut rng);
    let mut flipped: Vec<usize> = order.into_iter().take(n_flip).collect();
    flipped.sort_unstable();
    let mut corrupted = train.labels.clone();
    for &i in &flipped {
        let shift = 1 + rng.gen_range(0..task.classes - 1);
        corrupted[i] = (train.labels[i] + shift) % task.classes;
    }

    let (weights, final_grad_norm, steps, loss_history) =
        fit_logistic(&train.features, &corrupted, task.classes, cfg)?;

    let dump = gradient_dump(&train.features, &corrupted, &val, &weights, task.classes)?;
    Ok(ToyOutcome {
        converged: final_grad_norm <= cfg.grad_norm_tol,
        weights,
        dump,
        flipped,
        corrupted_labels: corrupted,
        train,
        val,
        test,
        final_grad_norm,
        steps,
        loss_history,
    })
}

/// Per-example gradients `x_i (p_i - y_i)^T` (one d x C block per example)
/// and the averaged clean-validation gradient.
pub fn gradient_dump(
    train_features: &DenseMatrix,
    train_labels: &[usize],
    val: &Split,
    weights: &DenseMatrix,
    classes: usize,
) -> Result<GradientDump> {
    let d = train_features.cols();
    let n = train_features.rows();
    let probs = softmax_probs(train_features, weights)?;
    let mut grads = Vec::with_capacity(n);
    for i in 0..n {
        let x = train_features.row(i);
        let g = DenseMatrix::from_fn(d, classes, |j, k| {
            let resid = probs.get(i, k) - if train_labels[i] == k { 1.0 } else { 0.0 };
            x[j] * resid
        });
        grads.push(vec![GradientBlock::new("w", g)?]);
    }
    let val_probs = softmax_probs(&val.features, weights)?;
    let val_grad = nll_gradient(&val.features, &val_probs, &val.labels);
    let blocks = vec![BlockSpec {
        name: "w".into(),
        d,
        r: classes,
    }];
    let ids = (0..n).map(|i| i.to_string()).collect();
    GradientDump::new(blocks, grads, vec![GradientBlock::new("w", val_grad)?], ids)
}
