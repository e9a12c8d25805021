//! Stratified test / cross-validation split.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

use super::dataset::{Dataset, Fold};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub test_fraction: f64,
    pub n_folds: usize,
    pub seed: u64,
}

impl Default for SplitPlan {
    fn default() -> Self {
        SplitPlan {
            test_fraction: 1.0 / 6.0,
            n_folds: 5,
            seed: 0,
        }
    }
}

impl SplitPlan {
    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::config(format!(
                "test_fraction must be in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if self.n_folds < 2 {
            return Err(Error::config(format!("n_folds must be >= 2, got {}", self.n_folds)));
        }
        Ok(())
    }
}

/// Tags every sample as `Test` or `Cv(k)`.
///
/// Samples are grouped into `(group, label)` cells and shuffled within each
/// cell; the concatenated cell sequence is then dealt systematically, first
/// to the test set (exactly `round(test_fraction * n)` samples) and then
/// round-robin to the folds. Every cell therefore lands in each split in
/// proportion to its size, up to one sample.
pub fn split(dataset: &Dataset, plan: &SplitPlan) -> Result<Dataset> {
    plan.validate()?;
    let n = dataset.len();
    if n < 6 * plan.n_folds {
        return Err(Error::data(format!(
            "dataset of {n} samples is too small for {} folds (need {})",
            plan.n_folds,
            6 * plan.n_folds
        )));
    }
    let mut rng = rng_from_seed(plan.seed);
    let mut cells: BTreeMap<(usize, bool), Vec<usize>> = BTreeMap::new();
    for (i, s) in dataset.samples().iter().enumerate() {
        cells.entry((s.group, s.label)).or_default().push(i);
    }
    let mut order = Vec::with_capacity(n);
    for members in cells.values_mut() {
        members.shuffle(&mut rng);
        order.extend_from_slice(members);
    }

    let n_test = ((plan.test_fraction * n as f64).round() as usize).clamp(1, n - plan.n_folds);
    let offset = rng.random_range(0..plan.n_folds);
    let mut tags = vec![Fold::Test; n];
    let mut dealt = 0usize;
    for (pos, &idx) in order.iter().enumerate() {
        let is_test = (pos + 1) * n_test / n > pos * n_test / n;
        if !is_test {
            tags[idx] = Fold::Cv((dealt + offset) % plan.n_folds);
            dealt += 1;
        }
    }

    let mut out = dataset.clone();
    for (s, t) in out.samples_mut().iter_mut().zip(tags) {
        s.fold = Some(t);
    }
    Ok(out)
}
