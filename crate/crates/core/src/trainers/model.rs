use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::Scorer;

/// A trained fold model: one scorer, or one scorer per group with routing
/// by the sample's group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FoldModel {
    Single(Scorer),
    Routed(Vec<Scorer>),
}

impl FoldModel {
    pub fn score(&self, x: &[f64], group: usize) -> Result<f64> {
        match self {
            FoldModel::Single(s) => s.score(x),
            FoldModel::Routed(models) => models
                .get(group)
                .ok_or_else(|| Error::data(format!("no model for group id {group}")))?
                .score(x),
        }
    }

    /// Scores of the dataset rows at `indices`.
    pub fn score_indices(&self, dataset: &Dataset, indices: &[usize]) -> Result<Vec<f64>> {
        let samples = dataset.samples();
        indices.iter().map(|&i| self.score(&samples[i].features, samples[i].group)).collect()
    }
}
