use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scores, labels and group ids for one evaluated population.
///
/// `threshold` is the default `τ` for threshold-required metrics; the
/// binarised prediction is `Ŷ = 1[S ≥ τ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSet {
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
    pub groups: Vec<usize>,
    pub n_groups: usize,
    pub threshold: Option<f64>,
}

/// Which samples a metric is computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Subset {
    All,
    Group(usize),
}

impl ScoredSet {
    pub fn new(scores: Vec<f64>, labels: Vec<bool>, groups: Vec<usize>, n_groups: usize) -> Result<Self> {
        if labels.len() != scores.len() {
            return Err(Error::Shape { context: "scored set labels", expected: scores.len(), found: labels.len() });
        }
        if groups.len() != scores.len() {
            return Err(Error::Shape { context: "scored set groups", expected: scores.len(), found: groups.len() });
        }
        if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::data(format!("score {s} is outside [0, 1]")));
        }
        if let Some(g) = groups.iter().find(|&&g| g >= n_groups) {
            return Err(Error::data(format!("group id {g} is out of range for {n_groups} groups")));
        }
        Ok(ScoredSet { scores, labels, groups, n_groups, threshold: None })
    }

    /// Same samples, one group; useful for single-population metrics.
    pub fn ungrouped(scores: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        let n = scores.len();
        ScoredSet::new(scores, labels, vec![0; n], 1)
    }

    pub fn with_threshold(mut self, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::config(format!("threshold must lie in (0, 1), got {tau}")));
        }
        self.threshold = Some(tau);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn contains(&self, subset: Subset, i: usize) -> bool {
        match subset {
            Subset::All => true,
            Subset::Group(g) => self.groups[i] == g,
        }
    }

    /// Scores and labels of the samples in `subset`.
    pub fn restrict(&self, subset: Subset) -> (Vec<f64>, Vec<bool>) {
        (0..self.len())
            .filter(|&i| self.contains(subset, i))
            .map(|i| (self.scores[i], self.labels[i]))
            .unzip()
    }

    /// New set made of the rows at `indices` (repeats allowed).
    pub fn select(&self, indices: &[usize]) -> ScoredSet {
        ScoredSet {
            scores: indices.iter().map(|&i| self.scores[i]).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            groups: indices.iter().map(|&i| self.groups[i]).collect(),
            n_groups: self.n_groups,
            threshold: self.threshold,
        }
    }

    /// Same samples with labels replaced.
    pub fn relabel(&self, labels: Vec<bool>) -> Result<ScoredSet> {
        let mut out = ScoredSet::new(self.scores.clone(), labels, self.groups.clone(), self.n_groups)?;
        out.threshold = self.threshold;
        Ok(out)
    }
}

pub(crate) fn subset_name(subset: Subset) -> String {
    match subset {
        Subset::All => "all samples".to_owned(),
        Subset::Group(g) => format!("group {g}"),
    }
}

pub(crate) fn undefined(metric: &str, subset: Subset, reason: &str) -> Error {
    Error::UndefinedMetric {
        metric: metric.to_owned(),
        subset: subset_name(subset),
        reason: reason.to_owned(),
    }
}
