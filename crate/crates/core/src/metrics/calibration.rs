//! Binned calibration: expected calibration error and reliability curves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::scored::{undefined, ScoredSet, Subset};

/// Equal-width bin of a score on `[0, 1]`; a score of exactly 1 goes in the
/// last bin.
pub fn bin_of(score: f64, n_bins: usize) -> usize {
    ((score * n_bins as f64).floor() as usize).min(n_bins - 1)
}

fn check_bins(n_bins: usize) -> Result<()> {
    if n_bins == 0 {
        return Err(Error::config("number of calibration bins must be positive"));
    }
    Ok(())
}

/// Reliability curve over equal-width bins.
///
/// Empty bins have `None` mean score and positive rate. `ci` holds
/// per-bin bootstrap intervals on the positive rate when computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    pub edges: Vec<f64>,
    pub mean_score: Vec<Option<f64>>,
    pub positive_rate: Vec<Option<f64>>,
    pub counts: Vec<usize>,
    pub ci: Option<Vec<Option<(f64, f64)>>>,
}

impl CalibrationCurve {
    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// `Σ_b (count_b / n) |mean score_b − positive rate_b|`.
    pub fn ece(&self) -> f64 {
        let n = self.total() as f64;
        self.counts
            .iter()
            .zip(self.mean_score.iter().zip(&self.positive_rate))
            .filter_map(|(&c, (m, p))| Some(c as f64 / n * (m.as_ref()? - p.as_ref()?).abs()))
            .sum()
    }
}

pub(crate) fn curve_of(scores: &[f64], labels: &[bool], n_bins: usize) -> CalibrationCurve {
    let mut sums = vec![0.0; n_bins];
    let mut pos = vec![0usize; n_bins];
    let mut counts = vec![0usize; n_bins];
    for (&s, &y) in scores.iter().zip(labels) {
        let b = bin_of(s, n_bins);
        sums[b] += s;
        counts[b] += 1;
        pos[b] += y as usize;
    }
    let per_bin = |num: &dyn Fn(usize) -> f64| -> Vec<Option<f64>> {
        (0..n_bins).map(|b| (counts[b] > 0).then(|| num(b) / counts[b] as f64)).collect()
    };
    CalibrationCurve {
        edges: (0..=n_bins).map(|b| b as f64 / n_bins as f64).collect(),
        mean_score: per_bin(&|b| sums[b]),
        positive_rate: per_bin(&|b| pos[b] as f64),
        counts,
        ci: None,
    }
}

pub fn calibration_curve(set: &ScoredSet, subset: Subset, n_bins: usize) -> Result<CalibrationCurve> {
    check_bins(n_bins)?;
    let (scores, labels) = set.restrict(subset);
    if scores.is_empty() {
        return Err(undefined("calibration curve", subset, "no samples"));
    }
    Ok(curve_of(&scores, &labels, n_bins))
}

/// Expected calibration error with equal-width bins; empty bins are skipped.
pub fn ece(set: &ScoredSet, subset: Subset, n_bins: usize) -> Result<f64> {
    check_bins(n_bins)?;
    let (scores, labels) = set.restrict(subset);
    if scores.is_empty() {
        return Err(undefined("ece", subset, "no samples"));
    }
    Ok(curve_of(&scores, &labels, n_bins).ece())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_cases() {
        let s = ScoredSet::ungrouped(vec![0.25; 4], vec![true, false, false, false]).unwrap();
        assert_eq!(ece(&s, Subset::All, 10).unwrap(), 0.0);
        let s = ScoredSet::ungrouped(vec![0.95, 0.95], vec![false, false]).unwrap();
        assert!((ece(&s, Subset::All, 10).unwrap() - 0.95).abs() < 1e-15);
    }

    #[test]
    fn constant_scores_occupy_one_bin() {
        let s = ScoredSet::ungrouped(vec![0.42; 7], vec![true; 7]).unwrap();
        let c = calibration_curve(&s, Subset::All, 10).unwrap();
        assert_eq!(c.counts.iter().filter(|&&n| n > 0).count(), 1);
        assert_eq!(c.total(), 7);
        assert_eq!(c.edges.len(), 11);
        assert_eq!(bin_of(1.0, 10), 9);
        assert_eq!(bin_of(0.0, 10), 0);
    }
}
