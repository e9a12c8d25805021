//! Just Train Twice: ERM, then retraining with stage-1 errors upweighted.

use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::Result;

use super::config::{Method, TrainConfig};
use super::model::FoldModel;
use super::train::{split_rows, train, train_fold, FoldJob, FoldResult, TrainedEnsemble};

/// Misclassification threshold for the stage-1 error set.
pub const JTT_THRESHOLD: f64 = 0.5;

/// Rows among `indices` that `model` misclassifies at threshold 0.5.
pub fn error_set(model: &FoldModel, dataset: &Dataset, indices: &[usize]) -> Result<Vec<usize>> {
    let scores = model.score_indices(dataset, indices)?;
    Ok(indices
        .iter()
        .zip(scores)
        .filter(|(&i, s)| (*s >= JTT_THRESHOLD) != dataset.samples()[i].label)
        .map(|(&i, _)| i)
        .collect())
}

/// Per-row weights: `lambda_up` on the error set, 1 elsewhere.
pub fn jtt_weights(n_rows: usize, errors: &[usize], lambda_up: f64) -> Vec<f64> {
    let mut w = vec![1.0; n_rows];
    for &i in errors {
        w[i] = lambda_up;
    }
    w
}

pub(crate) fn train_jtt(config: &TrainConfig, dataset: &Dataset) -> Result<TrainedEnsemble> {
    let stage1_config = TrainConfig { method: Method::Erm, ..config.clone() };
    let stage1 = train(&stage1_config, dataset)?;
    let all_groups: Vec<usize> = (0..dataset.n_groups()).collect();
    let folds = stage1
        .folds
        .par_iter()
        .map(|s1| {
            let k = s1.fold;
            let (train_rows, val) = split_rows(dataset, k)?;
            let errors = error_set(&s1.model, dataset, &train_rows)?;
            let mut warnings: Vec<String> = Vec::new();
            if errors.is_empty() {
                let msg = format!("fold {k}: stage-1 model made no training errors; stage 2 is plain ERM");
                log::warn!("JTT {msg}");
                warnings.push(msg);
            }
            let weights = jtt_weights(dataset.len(), &errors, config.lambda_up);
            let run = train_fold(
                config,
                dataset,
                FoldJob { fold: k, train: train_rows, val, eval_groups: all_groups.clone(), weights: Some(weights), stage: "stage2" },
            )?;
            let mut log: Vec<_> = s1
                .log
                .iter()
                .cloned()
                .map(|mut r| {
                    r.stage = "stage1".into();
                    r.method = config.method.name().into();
                    r
                })
                .collect();
            log.extend(run.log);
            warnings.extend(run.warnings);
            Ok(FoldResult {
                fold: k,
                model: FoldModel::Single(run.scorer),
                best_val_worst_auroc: run.best,
                best_step: run.best_step,
                trajectory: run.trajectory,
                stop_step: run.stop_step,
                error_set: Some(errors),
                log,
                warnings,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainedEnsemble { config: config.clone(), folds })
}
