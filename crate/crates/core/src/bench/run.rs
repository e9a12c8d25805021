//! Grid execution, model selection and test-set evaluation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{split, Dataset};
use crate::error::{Error, Result};
use crate::metrics::{
    bootstrap, calibration_curve_ci, minimax_bootstrap, minimax_compare, paired_delta, BootstrapConfig,
    CalibrationCurve, Ensemble, GroupReport, Metric, MetricParams, MetricValue, Orientation, Subset, WORST_GROUP,
};
use crate::rng::derive_seed_parts;
use crate::trainers::{select, train, LogRecord, Method, TrainedEnsemble};

use super::common::{csv_text, fmt_opt, gap_estimates, in_pool, json_text, subsets, test_ensemble};
use super::config::{point_key, BenchmarkConfig};
use super::io::write_atomic;
use super::source::load_dataset;

pub const SCHEMA_VERSION: u32 = 1;

/// Recorded in every manifest and report.
pub const BOOTSTRAP_POLICY: &str = "each iteration resamples the test rows with replacement and scores them with one \
fold model drawn uniformly at random; the 95% percentile interval is widened to contain the point estimate";

pub const BASELINE: Method = Method::BalancedErm;

/// One grid point of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub method: String,
    pub hyperparameters: BTreeMap<String, f64>,
    pub seed: u64,
    pub mean_val_worst_auroc: f64,
    pub best_steps: Vec<usize>,
    pub stop_steps: Vec<usize>,
    pub selected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapValue {
    pub gap: String,
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Worst-group comparison of a method against the baseline, with a paired
/// bootstrap interval on the margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimaxRow {
    pub metric: String,
    pub fairer: bool,
    pub margin: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub h_worst_group: String,
    pub h_worst: f64,
    pub baseline_worst_group: String,
    pub baseline_worst: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupCurve {
    pub group: String,
    pub curve: CalibrationCurve,
}

/// Test-set evaluation of a method's selected ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub report: GroupReport,
    /// Paired differences against the baseline; empty for the baseline.
    pub deltas: Vec<MetricValue>,
    pub minimax: Vec<MinimaxRow>,
    pub gaps: Vec<GapValue>,
    pub calibration: Vec<GroupCurve>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub task: String,
    pub groups: Vec<String>,
    pub baseline: String,
    pub bootstrap_policy: String,
    pub methods: Vec<MethodReport>,
    pub selection: Vec<SelectionRow>,
}

impl RunReport {
    pub fn method(&self, method: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.report.method == method.name())
    }
}

/// Everything a run produces, before it is written out.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub manifest: serde_json::Value,
    /// Every trained grid point, in method then grid order.
    pub runs: Vec<TrainedEnsemble>,
    /// Test-set ensembles of the selected runs, in method order.
    pub ensembles: Vec<(Method, Ensemble)>,
    files: Vec<(&'static str, Vec<u8>)>,
}

impl RunOutcome {
    /// Names and contents of the report files.
    pub fn files(&self) -> &[(&'static str, Vec<u8>)] {
        &self.files
    }

    /// Writes every report file into `dir`, each atomically.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        self.files
            .iter()
            .map(|(name, bytes)| {
                let p = dir.join(name);
                write_atomic(&p, bytes).map(|_| p)
            })
            .collect()
    }
}

/// Runs the benchmark and writes its files into the configured output
/// directory.
pub fn run(cfg: &BenchmarkConfig) -> Result<RunOutcome> {
    let outcome = execute(cfg)?;
    outcome.write(&cfg.output_dir())?;
    Ok(outcome)
}

/// Runs the benchmark without writing anything.
pub fn execute(cfg: &BenchmarkConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    in_pool(cfg.workers, || {
        let dataset = split(&load_dataset(cfg)?, &cfg.split_plan())?;
        execute_on(cfg, &dataset)
    })
}

struct Job {
    method: Method,
    config: crate::trainers::TrainConfig,
}

fn execute_on(cfg: &BenchmarkConfig, dataset: &Dataset) -> Result<RunOutcome> {
    let methods = cfg.methods_with_baseline();
    let mut jobs = Vec::new();
    for &m in &methods {
        for p in cfg.grid_points(m)? {
            jobs.push(Job { method: m, config: p });
        }
    }
    info!("training {} grid points", jobs.len());
    let runs: Vec<TrainedEnsemble> = jobs
        .par_iter()
        .map(|j| {
            let r = train(&j.config, dataset);
            info!("{} {} done", j.method, point_key(&j.config.hyperparameters()));
            r
        })
        .collect::<Result<_>>()?;

    let mut selection = Vec::new();
    let mut chosen: Vec<(Method, &TrainedEnsemble)> = Vec::new();
    for &m in &methods {
        let idx: Vec<usize> = (0..jobs.len()).filter(|&i| jobs[i].method == m).collect();
        let candidates: Vec<TrainedEnsemble> = idx.iter().map(|&i| runs[i].clone()).collect();
        let best = select(&candidates)?;
        for (k, &i) in idx.iter().enumerate() {
            let r = &runs[i];
            for w in r.folds.iter().flat_map(|f| &f.warnings) {
                warn!("{m}: {w}");
            }
            selection.push(SelectionRow {
                method: m.name().into(),
                hyperparameters: r.config.hyperparameters(),
                seed: r.config.seed,
                mean_val_worst_auroc: r.mean_val_worst_auroc(),
                best_steps: r.folds.iter().map(|f| f.best_step).collect(),
                stop_steps: r.folds.iter().map(|f| f.stop_step).collect(),
                selected: k == best,
            });
        }
        chosen.push((m, &runs[idx[best]]));
    }

    let params = cfg.metric_params();
    let bcfg = cfg.bootstrap_config();
    let names = dataset.group_vocab().to_vec();
    let ensembles: Vec<(Method, Ensemble)> =
        chosen.iter().map(|(m, r)| Ok((*m, test_ensemble(dataset, r)?))).collect::<Result<_>>()?;
    let base_pos = methods.iter().position(|&m| m == BASELINE).expect("baseline is always run");
    let base_ens = &ensembles[base_pos].1;
    let ctx = EvalContext { cfg, params: &params, bcfg: &bcfg, names: &names };
    let base_report = ctx.evaluate(BASELINE, chosen[base_pos].1, base_ens, None)?;
    let mut reports = Vec::new();
    for (k, (m, ens)) in ensembles.iter().enumerate() {
        if k == base_pos {
            reports.push(base_report.clone());
        } else {
            reports.push(ctx.evaluate(*m, chosen[k].1, ens, Some((base_ens, &base_report.report)))?);
        }
    }

    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        task: cfg.task.clone(),
        groups: names,
        baseline: BASELINE.name().into(),
        bootstrap_policy: BOOTSTRAP_POLICY.into(),
        methods: reports,
        selection,
    };
    let manifest = manifest(cfg, dataset, &runs);
    let files = render_files(&report, &manifest, &runs)?;
    Ok(RunOutcome { report, manifest, runs, ensembles, files })
}

struct EvalContext<'a> {
    cfg: &'a BenchmarkConfig,
    params: &'a MetricParams,
    bcfg: &'a BootstrapConfig,
    names: &'a [String],
}

/// Metric on a subset, or the worst group's value when `subset` is `None`.
fn metric_fn(metric: Metric, subset: Option<Subset>, params: &MetricParams) -> impl Fn(&crate::metrics::ScoredSet) -> Result<f64> + Sync + '_ {
    move |s| match subset {
        Some(sub) => metric.evaluate(s, sub, params),
        None => metric.worst_group(s, params).map(|(_, v)| v),
    }
}

impl EvalContext<'_> {
    fn evaluate(
        &self,
        method: Method,
        trained: &TrainedEnsemble,
        ens: &Ensemble,
        baseline: Option<(&Ensemble, &GroupReport)>,
    ) -> Result<MethodReport> {
        let mut values = Vec::new();
        let mut deltas = Vec::new();
        for &metric in &self.cfg.metrics {
            let mut targets: Vec<(Option<Subset>, String)> =
                subsets(self.names).into_iter().map(|(s, n)| (Some(s), n)).collect();
            if metric.orientation() != Orientation::Neutral {
                targets.push((None, WORST_GROUP.into()));
            }
            for (subset, name) in targets {
                let f = metric_fn(metric, subset, self.params);
                match bootstrap(&f, ens, self.bcfg) {
                    Ok(e) => values.push(MetricValue::from_estimate(metric, &name, &e)),
                    Err(e) if e.is_metric() && subset.is_some() => {
                        warn!("{method}: {metric} is undefined for {name}; reported as absent");
                        continue;
                    }
                    Err(e) if e.is_metric() => {
                        return Err(Error::UndefinedMetric {
                            metric: metric.name().into(),
                            subset: format!("the worst group of {method}"),
                            reason: e.to_string(),
                        })
                    }
                    Err(e) => return Err(e),
                }
                if let Some((base, _)) = baseline {
                    match paired_delta(&f, ens, base, self.bcfg) {
                        Ok(e) => deltas.push(MetricValue::from_estimate(metric, &name, &e)),
                        Err(e) if e.is_metric() => warn!("{method}: no {metric} delta for {name}: {e}"),
                        Err(e) => return Err(e),
                    }
                }
            }
        }
        let report = GroupReport {
            task: self.cfg.task.clone(),
            method: method.name().into(),
            hyperparameters: trained.config.hyperparameters(),
            groups: self.names.to_vec(),
            values,
        };

        let mut minimax = Vec::new();
        if let Some((base, base_report)) = baseline {
            for &metric in self.cfg.metrics.iter().filter(|m| m.orientation() != Orientation::Neutral) {
                let cmp = minimax_compare(&report, base_report, metric)?;
                let est = minimax_bootstrap(ens, base, metric, self.params, self.bcfg)?;
                minimax.push(MinimaxRow {
                    metric: metric.name().into(),
                    fairer: cmp.fairer,
                    margin: cmp.margin,
                    ci_low: est.ci_low,
                    ci_high: est.ci_high,
                    h_worst_group: cmp.h_worst_group,
                    h_worst: cmp.h_worst,
                    baseline_worst_group: cmp.baseline_worst_group,
                    baseline_worst: cmp.baseline_worst,
                });
            }
        }

        let gaps = gap_estimates(ens, self.cfg.tau, self.bcfg)?
            .into_iter()
            .map(|(gap, e)| GapValue { gap: gap.into(), point: e.point, ci_low: e.ci_low, ci_high: e.ci_high })
            .collect();
        let mut calibration = Vec::new();
        for (subset, name) in subsets(self.names) {
            match calibration_curve_ci(ens, subset, self.cfg.ece_bins, self.bcfg) {
                Ok(curve) => calibration.push(GroupCurve { group: name, curve }),
                Err(e) if e.is_metric() => warn!("{method}: no calibration curve for {name}: {e}"),
                Err(e) => return Err(e),
            }
        }
        Ok(MethodReport { report, deltas, minimax, gaps, calibration })
    }
}

/// The config echo drops the output directory and worker count, which do
/// not affect results.
fn config_echo(cfg: &BenchmarkConfig) -> BenchmarkConfig {
    BenchmarkConfig { output_dir: None, workers: None, ..cfg.clone() }
}

fn manifest(cfg: &BenchmarkConfig, dataset: &Dataset, runs: &[TrainedEnsemble]) -> serde_json::Value {
    let run_seeds: Vec<serde_json::Value> = runs
        .iter()
        .map(|r| {
            serde_json::json!({
                "method": r.config.method.name(),
                "hyperparameters": r.config.hyperparameters(),
                "seed": r.config.seed,
            })
        })
        .collect();
    serde_json::json!({
        "schema_version": SCHEMA_VERSION,
        "package": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": config_echo(cfg),
        "seeds": {
            "master": cfg.seed,
            "data": derive_seed_parts(cfg.seed, &["data"]),
            "split": cfg.split_plan().seed,
            "bootstrap": cfg.bootstrap_config().seed,
            "runs": run_seeds,
        },
        "bootstrap_policy": BOOTSTRAP_POLICY,
        "dataset": {
            "rows": dataset.len(),
            "feature_dim": dataset.feature_dim(),
            "groups": dataset.group_vocab(),
            "group_counts": dataset.group_counts(),
            "test_rows": dataset.test_indices().len(),
            "n_folds": dataset.n_folds(),
        },
        "files": FILES,
    })
}

/// Report files written by [`run`].
pub const FILES: [&str; 8] = [
    "manifest.json",
    "metrics.csv",
    "deltas.csv",
    "minimax.csv",
    "gaps.csv",
    "calibration.csv",
    "selection.csv",
    "report.json",
];

pub const TRAIN_LOG: &str = "train_log.jsonl";

#[derive(Serialize)]
struct LogLine<'a> {
    hyperparameters: BTreeMap<String, f64>,
    #[serde(flatten)]
    record: &'a LogRecord,
}

fn render_files(
    report: &RunReport,
    manifest: &serde_json::Value,
    runs: &[TrainedEnsemble],
) -> Result<Vec<(&'static str, Vec<u8>)>> {
    let task = &report.task;
    let f = |v: f64| v.to_string();
    let hp = |m: &MethodReport| point_key(&m.report.hyperparameters);

    let metrics = csv_text(
        &["task", "method", "hyperparameters", "group", "metric", "point", "ci_low", "ci_high"],
        report.methods.iter().flat_map(|m| {
            m.report.values.iter().map(move |v| {
                vec![task.clone(), m.report.method.clone(), hp(m), v.group.clone(), v.metric.clone(), f(v.point), fmt_opt(v.ci_low), fmt_opt(v.ci_high)]
            })
        }),
    )?;
    let deltas = csv_text(
        &["task", "method", "baseline", "hyperparameters", "group", "metric", "delta", "ci_low", "ci_high"],
        report.methods.iter().flat_map(|m| {
            m.deltas.iter().map(move |v| {
                vec![
                    task.clone(),
                    m.report.method.clone(),
                    report.baseline.clone(),
                    hp(m),
                    v.group.clone(),
                    v.metric.clone(),
                    f(v.point),
                    fmt_opt(v.ci_low),
                    fmt_opt(v.ci_high),
                ]
            })
        }),
    )?;
    let minimax = csv_text(
        &[
            "task", "method", "baseline", "metric", "h_worst_group", "h_worst", "baseline_worst_group",
            "baseline_worst", "margin", "ci_low", "ci_high", "fairer",
        ],
        report.methods.iter().flat_map(|m| {
            m.minimax.iter().map(move |r| {
                vec![
                    task.clone(),
                    m.report.method.clone(),
                    report.baseline.clone(),
                    r.metric.clone(),
                    r.h_worst_group.clone(),
                    f(r.h_worst),
                    r.baseline_worst_group.clone(),
                    f(r.baseline_worst),
                    f(r.margin),
                    f(r.ci_low),
                    f(r.ci_high),
                    r.fairer.to_string(),
                ]
            })
        }),
    )?;
    let gaps = csv_text(
        &["task", "method", "hyperparameters", "gap", "point", "ci_low", "ci_high"],
        report.methods.iter().flat_map(|m| {
            m.gaps.iter().map(move |g| {
                vec![task.clone(), m.report.method.clone(), hp(m), g.gap.clone(), f(g.point), f(g.ci_low), f(g.ci_high)]
            })
        }),
    )?;
    let mut cal_rows = Vec::new();
    for m in &report.methods {
        for gc in &m.calibration {
            let c = &gc.curve;
            for b in 0..c.n_bins() {
                let ci = c.ci.as_ref().and_then(|v| v[b]);
                cal_rows.push(vec![
                    task.clone(),
                    m.report.method.clone(),
                    gc.group.clone(),
                    b.to_string(),
                    f(c.edges[b]),
                    f(c.edges[b + 1]),
                    c.counts[b].to_string(),
                    fmt_opt(c.mean_score[b]),
                    fmt_opt(c.positive_rate[b]),
                    fmt_opt(ci.map(|x| x.0)),
                    fmt_opt(ci.map(|x| x.1)),
                ]);
            }
        }
    }
    let calibration = csv_text(
        &[
            "task", "method", "group", "bin", "lower", "upper", "count", "mean_score", "positive_rate", "ci_low",
            "ci_high",
        ],
        cal_rows,
    )?;
    let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
    let selection = csv_text(
        &["method", "hyperparameters", "seed", "mean_val_worst_auroc", "best_steps", "stop_steps", "selected"],
        report.selection.iter().map(|s| {
            vec![
                s.method.clone(),
                point_key(&s.hyperparameters),
                s.seed.to_string(),
                f(s.mean_val_worst_auroc),
                join(&s.best_steps),
                join(&s.stop_steps),
                s.selected.to_string(),
            ]
        }),
    )?;
    let mut log = Vec::new();
    for r in runs {
        for record in r.log() {
            serde_json::to_writer(&mut log, &LogLine { hyperparameters: r.config.hyperparameters(), record })?;
            log.push(b'\n');
        }
    }
    Ok(vec![
        ("manifest.json", json_text(manifest)?),
        ("metrics.csv", metrics),
        ("deltas.csv", deltas),
        ("minimax.csv", minimax),
        ("gaps.csv", gaps),
        ("calibration.csv", calibration),
        ("selection.csv", selection),
        ("report.json", json_text(report)?),
        (TRAIN_LOG, log),
    ])
}
