//! Cross-validated training with early stopping on validation worst-group
//! AUROC.

use std::collections::BTreeMap;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{BalancedBatches, Batches, Dataset, UniformBatches};
use crate::error::{Error, Result};
use crate::metrics::{auroc, ScoredSet, Subset};
use crate::numerics::{adam_step, sample_bce, AdamState, Mlp, Scorer};
use crate::rng::{derive_seed, derive_seed_parts};

use super::config::{Method, SamplerKind, TrainConfig};
use super::model::FoldModel;
use super::objective::{adversary_for, evaluate, GroupBatch, Objective};
use super::penalties::{DualState, GroupWeights};

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub method: String,
    pub fold: usize,
    /// Empty for single-stage methods; `stage1`/`stage2` for JTT, the group
    /// name for Stratified ERM.
    #[serde(skip_serializing_if = "String::is_empty", default)]
    pub stage: String,
    pub step: usize,
    pub split: String,
    pub group_auroc: BTreeMap<String, f64>,
    pub worst_auroc: f64,
    /// Mean loss components over the steps since the previous evaluation.
    pub loss: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub q: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mu: Option<Vec<f64>>,
}

/// Outcome of training one fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub model: FoldModel,
    pub best_val_worst_auroc: f64,
    pub best_step: usize,
    /// `(step, validation worst-group AUROC)` at every evaluation.
    pub trajectory: Vec<(usize, f64)>,
    pub stop_step: usize,
    /// JTT stage-1 error set (dataset row indices).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error_set: Option<Vec<usize>>,
    pub log: Vec<LogRecord>,
    pub warnings: Vec<String>,
}

/// Fold models for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedEnsemble {
    pub config: TrainConfig,
    pub folds: Vec<FoldResult>,
}

impl TrainedEnsemble {
    pub fn n_models(&self) -> usize {
        self.folds.len()
    }

    pub fn models(&self) -> impl Iterator<Item = &FoldModel> {
        self.folds.iter().map(|f| &f.model)
    }

    /// Mean over folds of the best validation worst-group AUROC.
    pub fn mean_val_worst_auroc(&self) -> f64 {
        self.folds.iter().map(|f| f.best_val_worst_auroc).sum::<f64>() / self.folds.len() as f64
    }

    /// One score vector per fold model over the rows at `indices`.
    pub fn scores(&self, dataset: &Dataset, indices: &[usize]) -> Result<Vec<Vec<f64>>> {
        self.models().map(|m| m.score_indices(dataset, indices)).collect()
    }

    pub fn log(&self) -> impl Iterator<Item = &LogRecord> {
        self.folds.iter().flat_map(|f| f.log.iter())
    }
}

/// Per-fold random streams. Initialisation, batch sampling and the
/// adversary each get their own stream so that switching a penalty on or
/// off never shifts the others.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FoldSeeds {
    pub init: u64,
    pub sampler: u64,
    pub adversary: u64,
}

impl FoldSeeds {
    pub fn new(seed: u64, fold: usize) -> Self {
        let base = derive_seed_parts(seed, &["fold", &fold.to_string()]);
        FoldSeeds {
            init: derive_seed(base, b"init"),
            sampler: derive_seed(base, b"sampler"),
            adversary: derive_seed(base, b"adversary"),
        }
    }
}

enum MethodState {
    Plain,
    Mmd { lambda: f64 },
    MeanMatch { lambda: f64 },
    Alm { dual: DualState, eta: f64, c_sum: Vec<f64>, c_steps: usize },
    Adversarial { alpha: f64, adversary: Mlp, adam: AdamState },
    Arl { adversary: Mlp, adam: AdamState },
    Dro { q: GroupWeights, eta: f64 },
}

/// What one optimisation step did.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub loss: f64,
    pub bce: f64,
    pub penalty: f64,
    pub group_losses: Vec<Option<f64>>,
    pub q: Option<Vec<f64>>,
    pub mu: Option<Vec<f64>>,
    pub constraints: Option<Vec<f64>>,
    pub empty_cells: Vec<(usize, bool)>,
}

/// Step-by-step trainer for a single scorer on a set of training rows.
pub struct FoldTrainer<'a> {
    config: TrainConfig,
    dataset: &'a Dataset,
    weights: Option<Vec<f64>>,
    scorer: Scorer,
    adam: AdamState,
    state: MethodState,
    batches: Batches,
    steps: usize,
    empty_cell_steps: usize,
}

impl<'a> FoldTrainer<'a> {
    /// `weights`, when given, holds a sample weight for every dataset row.
    pub fn new(
        config: &TrainConfig,
        dataset: &'a Dataset,
        train_indices: &[usize],
        weights: Option<Vec<f64>>,
        seeds: FoldSeeds,
    ) -> Result<Self> {
        config.validate()?;
        if let Some(w) = &weights {
            if w.len() != dataset.len() {
                return Err(Error::Shape { context: "sample weights", expected: dataset.len(), found: w.len() });
            }
        }
        let scorer = Scorer::init(dataset.feature_dim(), &config.hidden, seeds.init)?;
        let adam = AdamState::new(scorer.net(), config.lr)?;
        let batches = match config.method.sampler() {
            SamplerKind::Balanced => {
                Batches::Balanced(BalancedBatches::new(dataset, train_indices, config.batch_size, seeds.sampler)?)
            }
            SamplerKind::Uniform => {
                Batches::Uniform(UniformBatches::new(train_indices, config.batch_size, seeds.sampler)?)
            }
        };
        let k = dataset.n_groups();
        let adversary = |arl: bool| -> Result<(Mlp, AdamState)> {
            let net = adversary_for(arl, dataset.feature_dim(), k, config.adversary_hidden, seeds.adversary)?;
            let adam = AdamState::new(&net, config.lr)?;
            Ok((net, adam))
        };
        let state = match config.method {
            Method::Erm | Method::BalancedErm | Method::StratifiedErm | Method::Jtt => MethodState::Plain,
            Method::MmdMatch => MethodState::Mmd { lambda: config.lambda },
            Method::MeanMatch => MethodState::MeanMatch { lambda: config.lambda },
            Method::FairAlm => MethodState::Alm {
                dual: DualState::new(2 * k, config.rho),
                eta: config.eta,
                c_sum: vec![0.0; 2 * k],
                c_steps: 0,
            },
            Method::Adversarial => {
                let (adversary, adam) = adversary(false)?;
                MethodState::Adversarial { alpha: config.alpha, adversary, adam }
            }
            Method::Arl => {
                let (adversary, adam) = adversary(true)?;
                MethodState::Arl { adversary, adam }
            }
            Method::GroupDro => MethodState::Dro { q: GroupWeights::uniform(k), eta: config.eta },
        };
        Ok(FoldTrainer {
            config: config.clone(),
            dataset,
            weights,
            scorer,
            adam,
            state,
            batches,
            steps: 0,
            empty_cell_steps: 0,
        })
    }

    pub fn scorer(&self) -> &Scorer {
        &self.scorer
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn group_weights(&self) -> Option<&GroupWeights> {
        match &self.state {
            MethodState::Dro { q, .. } => Some(q),
            _ => None,
        }
    }

    pub fn multipliers(&self) -> Option<&DualState> {
        match &self.state {
            MethodState::Alm { dual, .. } => Some(dual),
            _ => None,
        }
    }

    /// Draws the next batch and takes one optimisation step.
    pub fn step(&mut self) -> Result<StepInfo> {
        let idx = self.batches.next().expect("batch streams are infinite");
        let gb = GroupBatch::from_indices(self.dataset, &idx, self.weights.as_deref())?;
        self.step_on(&gb)
    }

    /// One optimisation step on a given batch.
    pub fn step_on(&mut self, gb: &GroupBatch) -> Result<StepInfo> {
        if let MethodState::Dro { q, eta } = &mut self.state {
            // Sagawa et al.'s order: move q with the current losses, then
            // descend the q-weighted loss.
            let scores = self.scorer.score_rows(&gb.batch.features)?;
            let mut num = vec![0.0; gb.n_groups];
            let mut den = vec![0.0; gb.n_groups];
            for i in 0..gb.len() {
                let w = gb.batch.weights[i];
                num[gb.groups[i]] += w * sample_bce(scores[i], gb.batch.labels[i]);
                den[gb.groups[i]] += w;
            }
            let losses: Vec<Option<f64>> = num.iter().zip(&den).map(|(n, d)| (*d > 0.0).then(|| n / d)).collect();
            q.update(&losses, *eta)?;
        }
        let eval = {
            let objective = match &self.state {
                MethodState::Plain => Objective::Bce,
                MethodState::Mmd { lambda } => Objective::Mmd { lambda: *lambda, bandwidth: None },
                MethodState::MeanMatch { lambda } => Objective::MeanMatch { lambda: *lambda },
                MethodState::Alm { dual, .. } => Objective::Lagrangian {
                    mu: &dual.multipliers,
                    rho: dual.penalty_coefficient,
                },
                MethodState::Adversarial { alpha, adversary, .. } => Objective::Adversarial { alpha: *alpha, adversary },
                MethodState::Arl { adversary, .. } => Objective::Arl { adversary },
                MethodState::Dro { q, .. } => Objective::GroupDro { q: &q.q },
            };
            evaluate(&objective, &self.scorer, gb)?
        };
        if !eval.loss.is_finite() {
            return Err(Error::NonFinite(format!("{} training loss at step {}", self.config.method, self.steps + 1)));
        }
        adam_step(self.scorer.net_mut(), &eval.grads, &mut self.adam)?;
        match &mut self.state {
            MethodState::Adversarial { adversary, adam, .. } | MethodState::Arl { adversary, adam } => {
                let g = eval.adversary_grads.as_ref().expect("adversarial objectives return adversary gradients");
                adam_step(adversary, g, adam)?;
            }
            MethodState::Alm { c_sum, c_steps, .. } => {
                let c = eval.constraints.as_ref().expect("lagrangian objective returns constraints");
                for (s, v) in c_sum.iter_mut().zip(c) {
                    *s += v;
                }
                *c_steps += 1;
            }
            _ => {}
        }
        if !eval.empty_cells.is_empty() {
            self.empty_cell_steps += 1;
        }
        self.steps += 1;
        Ok(StepInfo {
            loss: eval.loss,
            bce: eval.bce,
            penalty: eval.penalty,
            group_losses: eval.group_losses,
            q: self.group_weights().map(|q| q.q.clone()),
            mu: self.multipliers().map(|d| d.multipliers.clone()),
            constraints: eval.constraints,
            empty_cells: eval.empty_cells,
        })
    }

    /// FairALM dual ascent with the mean constraint over the steps since
    /// the previous call. No-op for other methods.
    pub fn end_interval(&mut self) -> Result<()> {
        if let MethodState::Alm { dual, eta, c_sum, c_steps } = &mut self.state {
            if *c_steps > 0 {
                let mean: Vec<f64> = c_sum.iter().map(|s| s / *c_steps as f64).collect();
                dual.update(&mean, *eta)?;
            }
            c_sum.iter_mut().for_each(|s| *s = 0.0);
            *c_steps = 0;
        }
        Ok(())
    }

    fn into_warnings(self) -> Vec<String> {
        if self.empty_cell_steps > 0 {
            vec![format!(
                "{} of {} steps had an empty (group, label) cell; those cells added no penalty",
                self.empty_cell_steps, self.steps
            )]
        } else {
            Vec::new()
        }
    }
}

/// Validation AUROC for every group in `groups`.
fn validate_groups(
    scorer: &Scorer,
    dataset: &Dataset,
    val: &[usize],
    groups: &[usize],
    fold: usize,
) -> Result<BTreeMap<usize, f64>> {
    let samples = dataset.samples();
    let scores = scorer.score_rows(&dataset.feature_matrix(val))?;
    let set = ScoredSet::new(
        scores,
        val.iter().map(|&i| samples[i].label).collect(),
        val.iter().map(|&i| samples[i].group).collect(),
        dataset.n_groups(),
    )?;
    let mut out = BTreeMap::new();
    for &g in groups {
        let v = auroc(&set, Subset::Group(g)).map_err(|_| {
            let has_positive = val.iter().any(|&i| samples[i].group == g && samples[i].label);
            let missing = if has_positive { 0 } else { 1 };
            Error::config(format!(
                "validation fold {fold}: cell (group {:?}, label {missing}) is empty, so worst-group AUROC is undefined",
                dataset.group_vocab()[g]
            ))
        })?;
        out.insert(g, v);
    }
    Ok(out)
}

/// Options for [`train_fold`] beyond the configuration.
pub(crate) struct FoldJob<'a> {
    pub fold: usize,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub eval_groups: Vec<usize>,
    pub weights: Option<Vec<f64>>,
    pub stage: &'a str,
}

pub(crate) struct FoldRun {
    pub scorer: Scorer,
    pub best: f64,
    pub best_step: usize,
    pub trajectory: Vec<(usize, f64)>,
    pub stop_step: usize,
    pub log: Vec<LogRecord>,
    pub warnings: Vec<String>,
}

/// Trains one scorer with evaluation at step 0 and every `eval_every`
/// steps, keeping the best checkpoint and stopping after `patience`
/// evaluations without strict improvement.
pub(crate) fn train_fold(config: &TrainConfig, dataset: &Dataset, job: FoldJob<'_>) -> Result<FoldRun> {
    let seeds = FoldSeeds::new(config.seed, job.fold);
    let mut trainer = FoldTrainer::new(config, dataset, &job.train, job.weights, seeds)?;
    let names = dataset.group_vocab();
    let mut log = Vec::new();
    let mut record = |step: usize, per_group: &BTreeMap<usize, f64>, loss: BTreeMap<String, f64>, t: &FoldTrainer| {
        let worst = per_group.values().copied().fold(f64::INFINITY, f64::min);
        log.push(LogRecord {
            method: config.method.name().to_owned(),
            fold: job.fold,
            stage: job.stage.to_owned(),
            step,
            split: "val".to_owned(),
            group_auroc: per_group.iter().map(|(&g, &v)| (names[g].clone(), v)).collect(),
            worst_auroc: worst,
            loss,
            q: t.group_weights().map(|q| q.q.clone()),
            mu: t.multipliers().map(|d| d.multipliers.clone()),
        });
        worst
    };

    let first = validate_groups(trainer.scorer(), dataset, &job.val, &job.eval_groups, job.fold)?;
    let mut best = record(0, &first, BTreeMap::new(), &trainer);
    let mut best_scorer = trainer.scorer().clone();
    let mut best_step = 0;
    let mut trajectory = vec![(0, best)];
    let mut since_best = 0;
    let mut sums = [0.0; 3];
    let mut interval = 0usize;
    while trainer.steps() < config.max_steps {
        let info = trainer.step()?;
        sums[0] += info.loss;
        sums[1] += info.bce;
        sums[2] += info.penalty;
        interval += 1;
        let step = trainer.steps();
        if step % config.eval_every != 0 {
            continue;
        }
        trainer.end_interval()?;
        let loss: BTreeMap<String, f64> = ["total", "bce", "penalty"]
            .iter()
            .zip(sums)
            .map(|(k, s)| ((*k).to_owned(), s / interval as f64))
            .collect();
        sums = [0.0; 3];
        interval = 0;
        let per_group = validate_groups(trainer.scorer(), dataset, &job.val, &job.eval_groups, job.fold)?;
        let worst = record(step, &per_group, loss, &trainer);
        trajectory.push((step, worst));
        if worst > best {
            best = worst;
            best_step = step;
            best_scorer = trainer.scorer().clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                break;
            }
        }
    }
    let stop_step = trainer.steps();
    let mut warnings = trainer.into_warnings();
    for w in &warnings {
        warn!("{} fold {}{}: {w}", config.method, job.fold, if job.stage.is_empty() { String::new() } else { format!(" ({})", job.stage) });
    }
    warnings.iter_mut().for_each(|w| *w = format!("fold {}: {w}", job.fold));
    Ok(FoldRun { scorer: best_scorer, best, best_step, trajectory, stop_step, log, warnings })
}

fn check_split(dataset: &Dataset) -> Result<usize> {
    if !dataset.is_split() {
        return Err(Error::config("training needs a dataset with fold tags; run split first"));
    }
    let k = dataset.n_folds();
    if k < 2 {
        return Err(Error::config(format!("training needs at least 2 folds, found {k}")));
    }
    Ok(k)
}

/// Rows of the cross-validation folds other than `fold`, and of `fold`.
fn fold_rows(dataset: &Dataset, fold: usize, n_folds: usize) -> (Vec<usize>, Vec<usize>) {
    let mut train: Vec<usize> = (0..n_folds).filter(|&j| j != fold).flat_map(|j| dataset.fold_indices(j)).collect();
    train.sort_unstable();
    (train, dataset.fold_indices(fold))
}

/// Trains one model per validation fold. Test rows are never read.
pub fn train(config: &TrainConfig, dataset: &Dataset) -> Result<TrainedEnsemble> {
    config.validate()?;
    let n_folds = check_split(dataset)?;
    match config.method {
        Method::StratifiedErm => return super::stratified::train_stratified(config, dataset),
        Method::Jtt => return super::jtt::train_jtt(config, dataset),
        _ => {}
    }
    let all_groups: Vec<usize> = (0..dataset.n_groups()).collect();
    let folds = (0..n_folds)
        .into_par_iter()
        .map(|k| {
            let (train, val) = fold_rows(dataset, k, n_folds);
            let run = train_fold(
                config,
                dataset,
                FoldJob { fold: k, train, val, eval_groups: all_groups.clone(), weights: None, stage: "" },
            )?;
            Ok(FoldResult {
                fold: k,
                model: FoldModel::Single(run.scorer),
                best_val_worst_auroc: run.best,
                best_step: run.best_step,
                trajectory: run.trajectory,
                stop_step: run.stop_step,
                error_set: None,
                log: run.log,
                warnings: run.warnings,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainedEnsemble { config: config.clone(), folds })
}

pub(crate) fn split_rows(dataset: &Dataset, fold: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = check_split(dataset)?;
    Ok(fold_rows(dataset, fold, n))
}

/// Index of the run with the best mean validation worst-group AUROC. Ties
/// go to the smaller penalty weight, then to the earlier run.
pub fn select(runs: &[TrainedEnsemble]) -> Result<usize> {
    if runs.is_empty() {
        return Err(Error::config("model selection needs at least one run"));
    }
    let mut best = 0;
    for (i, r) in runs.iter().enumerate().skip(1) {
        let (a, b) = (r.mean_val_worst_auroc(), runs[best].mean_val_worst_auroc());
        if a > b || (a == b && r.config.penalty_weight() < runs[best].config.penalty_weight()) {
            best = i;
        }
    }
    Ok(best)
}
