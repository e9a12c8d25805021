//! Calibration of a classifier against proxy labels.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{
    bootstrap, calibration_curve_ci, BootstrapConfig, CalibrationCurve, Ensemble, Metric, MetricParams, MetricValue,
    ScoredSet, Subset, ALL_GROUPS,
};

/// Per-group calibration curves and metrics with labels replaced by a proxy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyReport {
    pub proxy: String,
    pub groups: Vec<String>,
    /// One curve per group, in group order.
    pub curves: Vec<CalibrationCurve>,
    /// AUROC, BCE and ECE per group and for all samples.
    pub values: Vec<MetricValue>,
}

impl ProxyReport {
    pub fn get(&self, metric: Metric, group: &str) -> Option<&MetricValue> {
        self.values.iter().find(|v| v.metric == metric.name() && v.group == group)
    }
}

/// Proxy labels of the rows at `indices`.
pub fn proxy_labels(dataset: &Dataset, indices: &[usize], proxy: &str) -> Result<Vec<bool>> {
    indices
        .iter()
        .map(|&i| {
            dataset.samples()[i]
                .proxies
                .get(proxy)
                .copied()
                .ok_or_else(|| Error::data(format!("sample {i} has no proxy label {proxy:?}")))
        })
        .collect()
}

/// Evaluates `scores` (one vector per model over the rows at `indices`)
/// against the proxy labels.
pub fn proxy_evaluate(
    dataset: &Dataset,
    indices: &[usize],
    scores: Vec<Vec<f64>>,
    proxy: &str,
    params: &MetricParams,
    cfg: &BootstrapConfig,
) -> Result<ProxyReport> {
    let labels = proxy_labels(dataset, indices, proxy)?;
    let groups: Vec<usize> = indices.iter().map(|&i| dataset.samples()[i].group).collect();
    let template = ScoredSet::new(vec![0.5; indices.len()], labels, groups, dataset.n_groups())?;
    let ensemble = Ensemble::from_scores(&template, scores)?;
    evaluate_ensemble(&ensemble, dataset.group_vocab(), proxy, params, cfg)
}

pub(crate) fn evaluate_ensemble(
    ensemble: &Ensemble,
    names: &[String],
    proxy: &str,
    params: &MetricParams,
    cfg: &BootstrapConfig,
) -> Result<ProxyReport> {
    let mut values = Vec::new();
    let mut curves = Vec::new();
    let subsets = (0..names.len()).map(|g| (Subset::Group(g), names[g].as_str())).chain([(Subset::All, ALL_GROUPS)]);
    for (subset, name) in subsets {
        for metric in [Metric::Auroc, Metric::Bce, Metric::Ece] {
            match bootstrap(|s| metric.evaluate(s, subset, params), ensemble, cfg) {
                Ok(e) => values.push(MetricValue::from_estimate(metric, name, &e)),
                Err(e) if e.is_metric() => log::warn!("proxy {proxy}: {metric} undefined for {name}: {e}"),
                Err(e) => return Err(e),
            }
        }
        if let Subset::Group(_) = subset {
            curves.push(calibration_curve_ci(ensemble, subset, params.ece_bins, cfg)?);
        }
    }
    Ok(ProxyReport { proxy: proxy.to_owned(), groups: names.to_vec(), curves, values })
}
