//! Stratified ERM: an independent model per group, routed by group.

use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};

use super::config::TrainConfig;
use super::model::FoldModel;
use super::train::{split_rows, train_fold, FoldJob, FoldResult, TrainedEnsemble};

pub(crate) fn train_stratified(config: &TrainConfig, dataset: &Dataset) -> Result<TrainedEnsemble> {
    let n_folds = dataset.n_folds();
    let samples = dataset.samples();
    let folds = (0..n_folds)
        .into_par_iter()
        .map(|k| {
            let (train_rows, val_rows) = split_rows(dataset, k)?;
            let mut scorers = Vec::new();
            let mut best = f64::INFINITY;
            let mut trajectories = Vec::new();
            let mut stop_step = 0;
            let mut best_step = 0;
            let mut log = Vec::new();
            let mut warnings = Vec::new();
            for (g, name) in dataset.group_vocab().iter().enumerate() {
                let train: Vec<usize> = train_rows.iter().copied().filter(|&i| samples[i].group == g).collect();
                let val: Vec<usize> = val_rows.iter().copied().filter(|&i| samples[i].group == g).collect();
                if train.is_empty() {
                    return Err(Error::config(format!("group {name:?} has no training samples in fold {k}")));
                }
                let run = train_fold(
                    config,
                    dataset,
                    FoldJob { fold: k, train, val, eval_groups: vec![g], weights: None, stage: name },
                )?;
                if run.best < best {
                    best = run.best;
                    best_step = run.best_step;
                }
                stop_step = stop_step.max(run.stop_step);
                trajectories.push(run.trajectory);
                log.extend(run.log);
                warnings.extend(run.warnings);
                scorers.push(run.scorer);
            }
            // Worst group at evaluation steps every group reached.
            let common = trajectories.iter().map(Vec::len).min().unwrap_or(0);
            let trajectory = (0..common)
                .map(|i| {
                    let step = trajectories[0][i].0;
                    (step, trajectories.iter().map(|t| t[i].1).fold(f64::INFINITY, f64::min))
                })
                .collect();
            Ok(FoldResult {
                fold: k,
                model: FoldModel::Routed(scorers),
                best_val_worst_auroc: best,
                best_step,
                trajectory,
                stop_step,
                error_set: None,
                log,
                warnings,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainedEnsemble { config: config.clone(), folds })
}
