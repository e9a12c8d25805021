//! Weighted binary cross-entropy and the batch-level backward pass.

use crate::error::{Error, Result};

use super::mlp::{GradSet, Scorer};

/// Scores are clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]` inside the loss only.
pub const BCE_CLAMP: f64 = 1e-7;

/// Row-major features with binary labels and nonnegative sample weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub features: Vec<f64>,
    pub dim: usize,
    pub labels: Vec<bool>,
    pub weights: Vec<f64>,
}

impl Batch {
    pub fn new(features: Vec<f64>, dim: usize, labels: Vec<bool>, weights: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if dim == 0 || features.len() != n * dim {
            return Err(Error::Shape {
                context: "batch features",
                expected: n * dim,
                found: features.len(),
            });
        }
        if weights.len() != n {
            return Err(Error::Shape { context: "batch weights", expected: n, found: weights.len() });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::data("sample weights must be finite and nonnegative"));
        }
        Ok(Batch { features, dim, labels, weights })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }
}

/// `-[y ln s + (1 - y) ln(1 - s)]` with the score clamped away from 0 and 1.
pub fn sample_bce(score: f64, label: bool) -> f64 {
    let s = score.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
    if label {
        -s.ln()
    } else {
        -(1.0 - s).ln()
    }
}

fn check_lengths(scores: &[f64], labels: &[bool], weights: &[f64]) -> Result<()> {
    if labels.len() != scores.len() {
        return Err(Error::Shape { context: "bce labels", expected: scores.len(), found: labels.len() });
    }
    if weights.len() != scores.len() {
        return Err(Error::Shape { context: "bce weights", expected: scores.len(), found: weights.len() });
    }
    Ok(())
}

/// Weighted mean binary cross-entropy, normalised by the weight sum.
pub fn bce(scores: &[f64], labels: &[bool], weights: &[f64]) -> Result<f64> {
    check_lengths(scores, labels, weights)?;
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::data("bce needs a positive total weight"));
    }
    let sum: f64 = scores
        .iter()
        .zip(labels)
        .zip(weights)
        .map(|((&s, &y), &w)| w * sample_bce(s, y))
        .sum();
    Ok(sum / total)
}

/// Gradient of [`bce`] with respect to each sample's logit.
///
/// Inside the clamp range this is `w_i (s_i - y_i) / W`; where the clamp is
/// active the loss is flat and the gradient is zero. An all-zero weight
/// vector yields all-zero gradients.
pub fn bce_logit_grads(scores: &[f64], labels: &[bool], weights: &[f64]) -> Result<Vec<f64>> {
    check_lengths(scores, labels, weights)?;
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return Ok(vec![0.0; scores.len()]);
    }
    Ok(scores
        .iter()
        .zip(labels)
        .zip(weights)
        .map(|((&s, &y), &w)| {
            if !(BCE_CLAMP..=1.0 - BCE_CLAMP).contains(&s) {
                0.0
            } else {
                w * (s - if y { 1.0 } else { 0.0 }) / total
            }
        })
        .collect())
}

/// Gradient of `bce + extra` with respect to every scorer parameter.
///
/// `extra_score_grad`, when given, holds `d extra / d S_i` for each sample
/// (for example a fairness penalty) and is chained through the logistic.
pub fn backward(scorer: &Scorer, batch: &Batch, extra_score_grad: Option<&[f64]>) -> Result<GradSet> {
    if batch.is_empty() {
        return Err(Error::data("backward needs a nonempty batch"));
    }
    if batch.dim != scorer.input_dim() {
        return Err(Error::Shape { context: "batch dim", expected: scorer.input_dim(), found: batch.dim });
    }
    let pass = scorer.forward_batch(&batch.features)?;
    let mut d_logits = bce_logit_grads(&pass.scores, &batch.labels, &batch.weights)?;
    if let Some(extra) = extra_score_grad {
        if extra.len() != batch.len() {
            return Err(Error::Shape { context: "extra score gradient", expected: batch.len(), found: extra.len() });
        }
        for (d, e) in d_logits.iter_mut().zip(pass.score_to_logit_grads(extra)) {
            *d += e;
        }
    }
    pass.backward_logits(scorer, &d_logits)
}
