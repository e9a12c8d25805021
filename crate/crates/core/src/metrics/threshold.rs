//! Threshold-required metrics and group-fairness gaps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::scored::{undefined, ScoredSet, Subset};

/// Confusion counts at a threshold together with the derived ratios.
/// Ratios whose denominator is zero are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub r#fn: usize,
    pub recall: Option<f64>,
    pub specificity: Option<f64>,
    pub ppv: Option<f64>,
    pub fpr: Option<f64>,
    pub predicted_prevalence: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn check_tau(tau: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::config(format!("threshold must lie in [0, 1], got {tau}")));
    }
    Ok(())
}

/// Confusion table for `Ŷ = 1[S ≥ τ]` on `subset`.
pub fn confusion_at(set: &ScoredSet, subset: Subset, tau: f64) -> Result<Confusion> {
    check_tau(tau)?;
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for i in (0..set.len()).filter(|&i| set.contains(subset, i)) {
        match (set.scores[i] >= tau, set.labels[i]) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    Ok(Confusion {
        tp,
        fp,
        tn,
        r#fn: fn_,
        recall: ratio(tp, tp + fn_),
        specificity: ratio(tn, tn + fp),
        ppv: ratio(tp, tp + fp),
        fpr: ratio(fp, fp + tn),
        predicted_prevalence: ratio(tp + fp, tp + fp + tn + fn_),
    })
}

/// Mean score of the `(g, y)` cell, i.e. the mean of `P(S | G = g, Y = y)`.
pub fn mean_score_cell(set: &ScoredSet, group: usize, label: bool) -> Result<f64> {
    let cell: Vec<f64> = (0..set.len())
        .filter(|&i| set.groups[i] == group && set.labels[i] == label)
        .map(|i| set.scores[i])
        .collect();
    if cell.is_empty() {
        return Err(undefined("mean score", Subset::Group(group), &format!("no samples with label {}", label as u8)));
    }
    Ok(cell.iter().sum::<f64>() / cell.len() as f64)
}

/// Max-minus-min across groups for each fairness definition. A gap is
/// `None` when fewer than two groups have the statistic defined.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GapTable {
    pub demographic_parity: Option<f64>,
    pub equalized_odds_tpr: Option<f64>,
    pub equalized_odds_fpr: Option<f64>,
    pub opportunity_positive: Option<f64>,
    pub opportunity_negative: Option<f64>,
    pub predictive_parity: Option<f64>,
    pub prob_equalized_odds_positive: Option<f64>,
    pub prob_equalized_odds_negative: Option<f64>,
}

impl GapTable {
    /// Larger of the two probabilistic equalized-odds gaps.
    pub fn prob_equalized_odds(&self) -> Option<f64> {
        match (self.prob_equalized_odds_positive, self.prob_equalized_odds_negative) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        }
    }

    /// `(name, value)` pairs in a fixed order.
    pub fn entries(&self) -> [(&'static str, Option<f64>); 8] {
        [
            ("demographic_parity", self.demographic_parity),
            ("equalized_odds_tpr", self.equalized_odds_tpr),
            ("equalized_odds_fpr", self.equalized_odds_fpr),
            ("opportunity_positive", self.opportunity_positive),
            ("opportunity_negative", self.opportunity_negative),
            ("predictive_parity", self.predictive_parity),
            ("prob_equalized_odds_positive", self.prob_equalized_odds_positive),
            ("prob_equalized_odds_negative", self.prob_equalized_odds_negative),
        ]
    }
}

fn spread(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    if defined.len() < 2 {
        return None;
    }
    let max = defined.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = defined.iter().copied().fold(f64::INFINITY, f64::min);
    Some(max - min)
}

pub fn fairness_gaps(set: &ScoredSet, tau: f64) -> Result<GapTable> {
    check_tau(tau)?;
    let per_group: Vec<Confusion> = (0..set.n_groups)
        .map(|g| confusion_at(set, Subset::Group(g), tau))
        .collect::<Result<_>>()?;
    let cell = |y: bool| (0..set.n_groups).map(move |g| mean_score_cell(set, g, y).ok());
    let tnr = per_group.iter().map(|c| c.specificity);
    Ok(GapTable {
        demographic_parity: spread(per_group.iter().map(|c| c.predicted_prevalence)),
        equalized_odds_tpr: spread(per_group.iter().map(|c| c.recall)),
        equalized_odds_fpr: spread(per_group.iter().map(|c| c.fpr)),
        opportunity_positive: spread(per_group.iter().map(|c| c.recall)),
        opportunity_negative: spread(tnr),
        predictive_parity: spread(per_group.iter().map(|c| c.ppv)),
        prob_equalized_odds_positive: spread(cell(true)),
        prob_equalized_odds_negative: spread(cell(false)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_edges() {
        let s = ScoredSet::ungrouped(vec![0.9, 0.8, 0.2, 0.1], vec![true, true, false, false]).unwrap();
        let c = confusion_at(&s, Subset::All, 0.5).unwrap();
        assert_eq!((c.recall, c.specificity), (Some(1.0), Some(1.0)));
        let c = confusion_at(&s, Subset::All, 0.95).unwrap();
        assert_eq!((c.recall, c.specificity, c.ppv), (Some(0.0), Some(1.0), None));
    }

    #[test]
    fn threshold_is_inclusive() {
        let s = ScoredSet::ungrouped(vec![0.5], vec![true]).unwrap();
        assert_eq!(confusion_at(&s, Subset::All, 0.5).unwrap().tp, 1);
    }

    #[test]
    fn mean_cell_and_missing_cell() {
        let s = ScoredSet::new(vec![0.3, 0.7], vec![true, false], vec![0, 1], 2).unwrap();
        assert_eq!(mean_score_cell(&s, 0, true).unwrap(), 0.3);
        assert!(mean_score_cell(&s, 0, false).is_err());
    }
}
