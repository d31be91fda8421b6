//! Full-batch gradient descent on the log loss for [`LogisticScorer`].

use serde::Serialize;

use super::{point_loss, sigmoid, FeatureMap, LogisticScorer, TrainingSet};
use crate::error::{param, Error, Result};

const MAX_HALVINGS: u32 = 60;

#[derive(Debug, Clone, Serialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Recorded for reproducibility. Zero initialization and full batches mean
    /// the trainer draws no randomness.
    pub seed: u64,
    /// Halve the step until the loss does not increase.
    pub backtracking: bool,
}

impl TrainConfig {
    pub fn new(epochs: usize, learning_rate: f64) -> Self {
        Self {
            epochs,
            learning_rate,
            seed: 0,
            backtracking: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub scorer: LogisticScorer,
    /// Log loss before the first epoch and after each epoch.
    pub losses: Vec<f64>,
}

/// Precomputed features and labels.
struct Design {
    dim: usize,
    rows: Vec<f64>,
    labels: Vec<bool>,
}

impl Design {
    fn new(data: &TrainingSet, map: &FeatureMap) -> Self {
        let dim = map.dim();
        let mut rows = Vec::with_capacity(data.len() * dim);
        let mut labels = Vec::with_capacity(data.len());
        let mut buf = Vec::with_capacity(dim);
        for (key, positive) in data.labelled() {
            map.encode_into(key, &mut buf);
            rows.extend_from_slice(&buf);
            labels.push(positive);
        }
        Self { dim, rows, labels }
    }

    fn examples(&self) -> impl Iterator<Item = (&[f64], bool)> {
        self.rows.chunks_exact(self.dim).zip(self.labels.iter().copied())
    }

    fn loss(&self, weights: &[f64], bias: f64) -> f64 {
        self.examples()
            .map(|(x, y)| point_loss(sigmoid(logit(weights, bias, x)), y))
            .sum()
    }

    /// Gradient of the summed (unclamped) cross-entropy: `Σ (σ(z) − y)·[x, 1]`.
    fn gradient(&self, weights: &[f64], bias: f64) -> (Vec<f64>, f64) {
        let mut grad = vec![0.0; self.dim];
        let mut grad_bias = 0.0;
        for (x, y) in self.examples() {
            let residual = sigmoid(logit(weights, bias, x)) - if y { 1.0 } else { 0.0 };
            for (g, xi) in grad.iter_mut().zip(x) {
                *g += residual * xi;
            }
            grad_bias += residual;
        }
        (grad, grad_bias)
    }
}

#[inline]
fn logit(weights: &[f64], bias: f64, x: &[f64]) -> f64 {
    weights.iter().zip(x).fold(bias, |acc, (w, xi)| acc + w * xi)
}

/// Analytic gradient of [`log_loss`](super::log_loss) with respect to
/// `(weights, bias)`, ignoring the clamp.
pub fn log_loss_gradient(scorer: &LogisticScorer, data: &TrainingSet) -> (Vec<f64>, f64) {
    Design::new(data, &scorer.feature_map).gradient(&scorer.weights, scorer.bias)
}

/// Fits a logistic scorer from zero initialization.
///
/// Each epoch takes one step along the gradient of the mean loss. With
/// backtracking the step is halved until the loss does not increase; if no
/// such step exists the weights stay put, so the recorded losses are
/// non-increasing.
pub fn train_logistic(data: &TrainingSet, feature_map: FeatureMap, config: &TrainConfig) -> Result<TrainOutcome> {
    if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
        return param(format!("learning rate {} must be positive", config.learning_rate));
    }
    feature_map.validate()?;
    let design = Design::new(data, &feature_map);
    let n = data.len() as f64;

    let mut weights = vec![0.0; design.dim];
    let mut bias = 0.0;
    let mut loss = design.loss(&weights, bias);
    let mut losses = Vec::with_capacity(config.epochs + 1);
    losses.push(loss);

    for epoch in 1..=config.epochs {
        let (grad, grad_bias) = design.gradient(&weights, bias);
        if !grad_bias.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Training {
                epoch,
                reason: "non-finite gradient".into(),
            });
        }
        let mut step = config.learning_rate / n;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let cand_w: Vec<f64> = weights.iter().zip(&grad).map(|(w, g)| w - step * g).collect();
            let cand_b = bias - step * grad_bias;
            let cand_loss = design.loss(&cand_w, cand_b);
            if !cand_loss.is_finite() && !config.backtracking {
                return Err(Error::Training {
                    epoch,
                    reason: format!("non-finite loss {cand_loss}"),
                });
            }
            if !config.backtracking || cand_loss <= loss {
                weights = cand_w;
                bias = cand_b;
                loss = cand_loss;
                accepted = true;
                break;
            }
            step /= 2.0;
        }
        if !accepted && !loss.is_finite() {
            return Err(Error::Training {
                epoch,
                reason: "loss is not finite".into(),
            });
        }
        losses.push(loss);
    }

    let scorer = LogisticScorer::new(weights, bias, feature_map).map_err(|e| Error::Training {
        epoch: config.epochs,
        reason: e.to_string(),
    })?;
    Ok(TrainOutcome { scorer, losses })
}
