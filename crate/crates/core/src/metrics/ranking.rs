//! Threshold-free ranking metrics.

use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::scored::{undefined, ScoredSet, Subset};

/// Probability that a random positive outranks a random negative, ties
/// counted one half. Computed from midranks in `O(n log n)`.
pub fn auroc(set: &ScoredSet, subset: Subset) -> Result<f64> {
    let (scores, labels) = set.restrict(subset);
    auroc_of(&scores, &labels).ok_or_else(|| undefined("auroc", subset, "needs at least one positive and one negative"))
}

pub(crate) fn auroc_of(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their mean
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        let pos_in_tie = order[i..=j].iter().filter(|&&k| labels[k]).count();
        rank_sum_pos += midrank * pos_in_tie as f64;
        i = j + 1;
    }
    let np = n_pos as f64;
    Some((rank_sum_pos - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

/// One operating point of a ROC curve: predicting positive for `S ≥ threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

/// ROC curve from `(0, 0)` at threshold `+∞` through every distinct score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

impl RocCurve {
    /// Trapezoidal area under the curve.
    pub fn area(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
            .sum()
    }
}

pub fn roc_curve(set: &ScoredSet, subset: Subset) -> Result<RocCurve> {
    let (scores, labels) = set.restrict(subset);
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(undefined("roc curve", subset, "needs at least one positive and one negative"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint { fpr: 0.0, tpr: 0.0, threshold: f64::INFINITY }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
            threshold: t,
        });
    }
    Ok(RocCurve { points })
}

/// Recall at the smallest threshold whose specificity is at least `k`.
///
/// Candidate thresholds are the distinct scores plus `+∞`; no interpolation
/// between operating points.
pub fn recall_at_specificity(set: &ScoredSet, subset: Subset, k: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&k) {
        return Err(crate::Error::config(format!("specificity target must lie in [0, 1], got {k}")));
    }
    let curve = roc_curve(set, subset)?;
    // Points run from the largest threshold to the smallest, so the last one
    // meeting the specificity target has the smallest threshold.
    let best = curve
        .points
        .iter()
        .filter(|p| 1.0 - p.fpr >= k - 1e-12)
        .last()
        .expect("threshold +inf always has specificity 1");
    Ok(best.tpr)
}
