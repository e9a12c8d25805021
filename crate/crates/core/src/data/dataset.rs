use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Split tag of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Fold {
    Test,
    Cv(usize),
}

impl fmt::Display for Fold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fold::Test => f.write_str("test"),
            Fold::Cv(k) => write!(f, "{k}"),
        }
    }
}

/// One labelled example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    /// Observed label `Y`.
    pub label: bool,
    /// Index into the dataset's group vocabulary.
    pub group: usize,
    /// Pre-noise truth, when known.
    pub gold_label: Option<bool>,
    pub proxies: BTreeMap<String, bool>,
    /// Extra categorical attributes (e.g. a second protected attribute).
    pub attributes: BTreeMap<String, String>,
    pub fold: Option<Fold>,
}

impl Sample {
    pub fn new(features: Vec<f64>, label: bool, group: usize) -> Self {
        Sample {
            features,
            label,
            group,
            gold_label: None,
            proxies: BTreeMap::new(),
            attributes: BTreeMap::new(),
            fold: None,
        }
    }
}

/// An ordered collection of samples over a fixed group vocabulary.
///
/// Invariants checked at construction: at least two groups, every group has
/// a sample, every sample has `feature_dim` features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    samples: Vec<Sample>,
    group_vocab: Vec<String>,
    feature_dim: usize,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, group_vocab: Vec<String>) -> Result<Self> {
        if group_vocab.len() < 2 {
            return Err(Error::data(format!(
                "need at least 2 groups, got {}",
                group_vocab.len()
            )));
        }
        let Some(first) = samples.first() else {
            return Err(Error::data("dataset is empty"));
        };
        let feature_dim = first.features.len();
        if feature_dim == 0 {
            return Err(Error::data("samples need at least one feature"));
        }
        let mut counts = vec![0usize; group_vocab.len()];
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != feature_dim {
                return Err(Error::data(format!(
                    "sample {i} has {} features, expected {feature_dim}",
                    s.features.len()
                )));
            }
            if s.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::data(format!("sample {i} has a non-finite feature")));
            }
            match counts.get_mut(s.group) {
                Some(c) => *c += 1,
                None => {
                    return Err(Error::data(format!(
                        "sample {i} has group id {} outside the vocabulary",
                        s.group
                    )))
                }
            }
        }
        if let Some(g) = counts.iter().position(|&c| c == 0) {
            return Err(Error::data(format!("group {:?} has no samples", group_vocab[g])));
        }
        Ok(Dataset {
            samples,
            group_vocab,
            feature_dim,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn group_vocab(&self) -> &[String] {
        &self.group_vocab
    }

    pub fn n_groups(&self) -> usize {
        self.group_vocab.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn group_index(&self, name: &str) -> Option<usize> {
        self.group_vocab.iter().position(|g| g == name)
    }

    pub fn group_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_groups()];
        for s in &self.samples {
            c[s.group] += 1;
        }
        c
    }

    /// Indices of samples matching `pred`, in dataset order.
    pub fn indices_where(&self, mut pred: impl FnMut(&Sample) -> bool) -> Vec<usize> {
        self.samples
            .iter()
            .enumerate()
            .filter(|(_, s)| pred(s))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn test_indices(&self) -> Vec<usize> {
        self.indices_where(|s| s.fold == Some(Fold::Test))
    }

    pub fn fold_indices(&self, k: usize) -> Vec<usize> {
        self.indices_where(|s| s.fold == Some(Fold::Cv(k)))
    }

    /// True once every sample carries a split tag.
    pub fn is_split(&self) -> bool {
        self.samples.iter().all(|s| s.fold.is_some())
    }

    /// Number of cross-validation folds referenced by the tags.
    pub fn n_folds(&self) -> usize {
        self.samples
            .iter()
            .filter_map(|s| match s.fold {
                Some(Fold::Cv(k)) => Some(k + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub(crate) fn samples_mut(&mut self) -> &mut [Sample] {
        &mut self.samples
    }

    /// Copy of the dataset restricted to `indices` (kept in the given order).
    ///
    /// Fails if the subset loses a group.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let samples = indices.iter().map(|&i| self.samples[i].clone()).collect();
        Dataset::new(samples, self.group_vocab.clone())
    }

    /// Rows of the given samples flattened row-major.
    pub fn feature_matrix(&self, indices: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(indices.len() * self.feature_dim);
        for &i in indices {
            out.extend_from_slice(&self.samples[i].features);
        }
        out
    }
}
