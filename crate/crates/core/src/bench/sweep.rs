//! Training across one hyperparameter axis without model selection.

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::split;
use crate::error::{Error, Result};
use crate::metrics::{bootstrap, fairness_gaps, Metric, ALL_GROUPS};
use crate::rng::derive_seed_parts;
use crate::trainers::{train, Method};

use super::common::{csv_text, fmt_opt, in_pool, json_text, subsets, test_ensemble, PROB_EO};
use super::config::{default_grid, BenchmarkConfig};
use super::io::write_atomic;
use super::source::load_dataset;

/// Metrics reported per axis value and group.
pub const SWEEP_METRICS: [Metric; 7] = [
    Metric::Auroc,
    Metric::Bce,
    Metric::Ece,
    Metric::Recall,
    Metric::Specificity,
    Metric::MeanScorePos,
    Metric::MeanScoreNeg,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub group: String,
    pub metric: String,
    pub point: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub method: String,
    pub axis: String,
    pub values: Vec<f64>,
    /// Shared by every axis value.
    pub seed: u64,
    pub groups: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// `metric` is a [`Metric`] name or `prob_equalized_odds` (group `ALL`).
    pub fn get(&self, value: f64, group: &str, metric: &str) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.value == value && r.group == group && r.metric == metric)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        csv_text(
            &["method", "axis", "value", "group", "metric", "point", "ci_low", "ci_high"],
            self.rows.iter().map(|r| {
                vec![
                    self.method.clone(),
                    self.axis.clone(),
                    r.value.to_string(),
                    r.group.clone(),
                    r.metric.clone(),
                    r.point.to_string(),
                    fmt_opt(r.ci_low),
                    fmt_opt(r.ci_high),
                ]
            }),
        )
    }
}

/// Axis values: the configured grid list, or the default grid with 0
/// prepended so a penalty-free reference point is included.
pub fn sweep_values(cfg: &BenchmarkConfig, method: Method, axis: &str) -> Result<Vec<f64>> {
    let configured = cfg.grid.iter().any(|(k, _)| k.parse::<Method>().ok() == Some(method));
    let grid = if configured { cfg.grid_for(method) } else { default_grid(method) };
    let mut values = grid
        .get(axis)
        .cloned()
        .ok_or_else(|| Error::config(format!("grid.{method} has no {axis:?} list")))?;
    if !configured && values.first().is_some_and(|&v| v > 0.0) {
        values.insert(0, 0.0);
    }
    Ok(values)
}

/// Trains one ensemble per axis value, all from the same seed, and
/// evaluates each on the test rows.
pub fn sweep(cfg: &BenchmarkConfig, method: Method, axis: Option<&str>) -> Result<SweepReport> {
    cfg.validate()?;
    let axis = match axis.or(method.axis()) {
        Some(a) if method.relevant().contains(&a) => a.to_owned(),
        Some(a) => return Err(Error::config(format!("{method} does not use hyperparameter {a:?}"))),
        None => return Err(Error::config(format!("{method} has no hyperparameter to sweep"))),
    };
    let values = sweep_values(cfg, method, &axis)?;
    let seed = derive_seed_parts(cfg.seed, &["sweep"]);
    in_pool(cfg.workers, || {
        let dataset = split(&load_dataset(cfg)?, &cfg.split_plan())?;
        let names = dataset.group_vocab().to_vec();
        let params = cfg.metric_params();
        let bcfg = cfg.bootstrap_config();
        let per_value: Vec<Vec<SweepRow>> = values
            .par_iter()
            .map(|&v| {
                let mut tc = cfg.train.train_config(method);
                tc.set(&axis, v)?;
                tc.seed = seed;
                let trained = train(&tc, &dataset)?;
                info!("{method} {axis}={v} done");
                let ens = test_ensemble(&dataset, &trained)?;
                let mut rows = Vec::new();
                let mut push = |group: &str, metric: &str, r: Result<crate::metrics::Estimate>| match r {
                    Ok(e) => {
                        rows.push(SweepRow {
                            value: v,
                            group: group.into(),
                            metric: metric.into(),
                            point: e.point,
                            ci_low: Some(e.ci_low),
                            ci_high: Some(e.ci_high),
                        });
                        Ok(())
                    }
                    Err(e) if e.is_metric() => {
                        warn!("{axis}={v}: {metric} undefined for {group}");
                        Ok(())
                    }
                    Err(e) => Err(e),
                };
                for (subset, name) in subsets(&names) {
                    for m in SWEEP_METRICS {
                        push(&name, m.name(), bootstrap(|s| m.evaluate(s, subset, &params), &ens, &bcfg))?;
                    }
                }
                let gap = bootstrap(
                    |s| {
                        fairness_gaps(s, params.tau)?.prob_equalized_odds().ok_or_else(|| Error::UndefinedMetric {
                            metric: PROB_EO.into(),
                            subset: "groups".into(),
                            reason: "a group has an empty cell".into(),
                        })
                    },
                    &ens,
                    &bcfg,
                );
                push(ALL_GROUPS, PROB_EO, gap)?;
                Ok(rows)
            })
            .collect::<Result<_>>()?;
        Ok(SweepReport {
            method: method.name().into(),
            axis,
            values: values.clone(),
            seed,
            groups: names,
            rows: per_value.into_iter().flatten().collect(),
        })
    })
}

/// [`sweep`], writing `sweep.csv` and `sweep_manifest.json` into the
/// output directory.
pub fn run_sweep(cfg: &BenchmarkConfig, method: Method, axis: Option<&str>) -> Result<SweepReport> {
    let report = sweep(cfg, method, axis)?;
    let dir = cfg.output_dir();
    write_atomic(&dir.join("sweep.csv"), &report.to_csv()?)?;
    let manifest = serde_json::json!({
        "package": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "config": BenchmarkConfig { output_dir: None, workers: None, ..cfg.clone() },
        "method": report.method,
        "axis": report.axis,
        "values": report.values,
        "seed": report.seed,
    });
    write_atomic(&dir.join("sweep_manifest.json"), &json_text(&manifest)?)?;
    Ok(report)
}
