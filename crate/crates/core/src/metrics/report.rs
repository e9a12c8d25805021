//! Named metrics, per-group reports and the minimax comparison.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::bce;

use super::bootstrap::{paired_delta, BootstrapConfig, Ensemble, Estimate};
use super::calibration::ece;
use super::ranking::{auroc, recall_at_specificity};
use super::scored::{undefined, ScoredSet, Subset};
use super::threshold::confusion_at;

/// Which direction of a metric is better; decides what "worst group" means.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    HigherIsBetter,
    LowerIsBetter,
    /// Descriptive statistics with no better direction.
    Neutral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Auroc,
    Bce,
    Ece,
    Recall,
    Specificity,
    Ppv,
    PredictedPrevalence,
    RecallAtSpecificity,
    MeanScorePos,
    MeanScoreNeg,
}

impl Metric {
    pub const ALL: [Metric; 10] = [
        Metric::Auroc,
        Metric::Bce,
        Metric::Ece,
        Metric::Recall,
        Metric::Specificity,
        Metric::Ppv,
        Metric::PredictedPrevalence,
        Metric::RecallAtSpecificity,
        Metric::MeanScorePos,
        Metric::MeanScoreNeg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Auroc => "auroc",
            Metric::Bce => "bce",
            Metric::Ece => "ece",
            Metric::Recall => "recall",
            Metric::Specificity => "specificity",
            Metric::Ppv => "ppv",
            Metric::PredictedPrevalence => "predicted_prevalence",
            Metric::RecallAtSpecificity => "recall_at_specificity",
            Metric::MeanScorePos => "mean_score_pos",
            Metric::MeanScoreNeg => "mean_score_neg",
        }
    }

    pub fn orientation(self) -> Orientation {
        match self {
            Metric::Auroc | Metric::Recall | Metric::Specificity | Metric::Ppv | Metric::RecallAtSpecificity => {
                Orientation::HigherIsBetter
            }
            Metric::Bce | Metric::Ece => Orientation::LowerIsBetter,
            Metric::PredictedPrevalence | Metric::MeanScorePos | Metric::MeanScoreNeg => Orientation::Neutral,
        }
    }

    /// Value on one subset of `set`.
    pub fn evaluate(self, set: &ScoredSet, subset: Subset, params: &MetricParams) -> Result<f64> {
        let ratio = |v: Option<f64>, what: &str| v.ok_or_else(|| undefined(self.name(), subset, what));
        match self {
            Metric::Auroc => auroc(set, subset),
            Metric::Bce => {
                let (s, y) = set.restrict(subset);
                if s.is_empty() {
                    return Err(undefined("bce", subset, "no samples"));
                }
                bce(&s, &y, &vec![1.0; s.len()])
            }
            Metric::Ece => ece(set, subset, params.ece_bins),
            Metric::Recall => ratio(confusion_at(set, subset, params.tau)?.recall, "no positives"),
            Metric::Specificity => ratio(confusion_at(set, subset, params.tau)?.specificity, "no negatives"),
            Metric::Ppv => ratio(confusion_at(set, subset, params.tau)?.ppv, "no predicted positives"),
            Metric::PredictedPrevalence => {
                ratio(confusion_at(set, subset, params.tau)?.predicted_prevalence, "no samples")
            }
            Metric::RecallAtSpecificity => recall_at_specificity(set, subset, params.specificity),
            Metric::MeanScorePos | Metric::MeanScoreNeg => {
                let want = self == Metric::MeanScorePos;
                let (s, y) = set.restrict(subset);
                let cell: Vec<f64> = s.iter().zip(&y).filter(|(_, &l)| l == want).map(|(&v, _)| v).collect();
                if cell.is_empty() {
                    return Err(undefined(self.name(), subset, "empty cell"));
                }
                Ok(cell.iter().sum::<f64>() / cell.len() as f64)
            }
        }
    }

    /// Worst value over groups: minimum for higher-is-better metrics,
    /// maximum for lower-is-better ones. Any undefined group makes the
    /// worst group undefined.
    pub fn worst_group(self, set: &ScoredSet, params: &MetricParams) -> Result<(usize, f64)> {
        let values = (0..set.n_groups)
            .map(|g| self.evaluate(set, Subset::Group(g), params))
            .collect::<Result<Vec<_>>>()?;
        worst_of(self, values.into_iter().enumerate())
            .ok_or_else(|| Error::config(format!("metric {self} has no worst group")))
    }
}

fn worst_of(metric: Metric, values: impl Iterator<Item = (usize, f64)>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (g, v) in values {
        let replace = match (best, metric.orientation()) {
            (None, Orientation::Neutral) => return None,
            (None, _) => true,
            (Some((_, b)), Orientation::HigherIsBetter) => v < b,
            (Some((_, b)), _) => v > b,
        };
        if replace {
            best = Some((g, v));
        }
    }
    best
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config(format!("unknown metric {s:?}")))
    }
}

/// Settings shared by threshold-based and binned metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricParams {
    pub tau: f64,
    pub ece_bins: usize,
    /// Specificity target for recall-at-specificity, as a fraction.
    pub specificity: f64,
}

impl Default for MetricParams {
    fn default() -> Self {
        MetricParams { tau: 0.5, ece_bins: 10, specificity: 0.8 }
    }
}

pub const ALL_GROUPS: &str = "ALL";
pub const WORST_GROUP: &str = "WORST";

/// One reported number; `group` is a group name, `ALL` or `WORST`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub metric: String,
    pub group: String,
    pub point: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

impl MetricValue {
    pub fn from_estimate(metric: Metric, group: &str, e: &Estimate) -> Self {
        MetricValue {
            metric: metric.name().to_owned(),
            group: group.to_owned(),
            point: e.point,
            ci_low: Some(e.ci_low),
            ci_high: Some(e.ci_high),
        }
    }

    pub fn point_only(metric: Metric, group: &str, point: f64) -> Self {
        MetricValue { metric: metric.name().to_owned(), group: group.to_owned(), point, ci_low: None, ci_high: None }
    }
}

/// Per-group metric values for one trained method.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GroupReport {
    pub task: String,
    pub method: String,
    pub hyperparameters: BTreeMap<String, f64>,
    pub groups: Vec<String>,
    pub values: Vec<MetricValue>,
}

impl GroupReport {
    pub fn get(&self, metric: Metric, group: &str) -> Option<&MetricValue> {
        self.values.iter().find(|v| v.metric == metric.name() && v.group == group)
    }

    /// Worst group by point estimate, ignoring groups with no value.
    pub fn worst(&self, metric: Metric) -> Result<(String, f64)> {
        let present = self
            .groups
            .iter()
            .enumerate()
            .filter_map(|(i, g)| self.get(metric, g).map(|v| (i, v.point)));
        worst_of(metric, present)
            .map(|(i, v)| (self.groups[i].clone(), v))
            .ok_or_else(|| Error::UndefinedMetric {
                metric: metric.name().into(),
                subset: format!("report for {}", self.method),
                reason: "no group has a value or the metric has no orientation".into(),
            })
    }
}

/// Outcome of comparing worst-group errors of `h` against a baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Minimax {
    /// True when `h`'s worst group is strictly better than the baseline's.
    pub fairer: bool,
    /// Improvement of `h` over the baseline in the worst group; positive
    /// means `h` is fairer.
    pub margin: f64,
    pub h_worst_group: String,
    pub h_worst: f64,
    pub baseline_worst_group: String,
    pub baseline_worst: f64,
}

fn signed_margin(metric: Metric, h: f64, baseline: f64) -> Result<f64> {
    match metric.orientation() {
        Orientation::HigherIsBetter => Ok(h - baseline),
        Orientation::LowerIsBetter => Ok(baseline - h),
        Orientation::Neutral => Err(Error::config(format!("metric {metric} has no better direction"))),
    }
}

/// Minimax comparison on point estimates.
pub fn minimax_compare(h: &GroupReport, baseline: &GroupReport, metric: Metric) -> Result<Minimax> {
    signed_margin(metric, 0.0, 0.0)?;
    let (hg, hv) = h.worst(metric)?;
    let (bg, bv) = baseline.worst(metric)?;
    let margin = signed_margin(metric, hv, bv)?;
    Ok(Minimax {
        fairer: margin > 0.0,
        margin,
        h_worst_group: hg,
        h_worst: hv,
        baseline_worst_group: bg,
        baseline_worst: bv,
    })
}

/// Paired-bootstrap interval on the minimax margin.
pub fn minimax_bootstrap(
    h: &Ensemble,
    baseline: &Ensemble,
    metric: Metric,
    params: &MetricParams,
    cfg: &BootstrapConfig,
) -> Result<Estimate> {
    let sign = signed_margin(metric, 1.0, 0.0)?;
    let e = paired_delta(|s| metric.worst_group(s, params).map(|(_, v)| v), h, baseline, cfg)?;
    Ok(if sign > 0.0 {
        e
    } else {
        Estimate { point: -e.point, ci_low: -e.ci_high, ci_high: -e.ci_low, redraws: e.redraws }
    })
}
