//! The `audit` verb: labeller PPV tables and proxy calibration.

use serde::{Deserialize, Serialize};

use crate::audit::{labeller_ppv, proxy_evaluate, Attribute, AuditTable, ProxyReport};
use crate::data::split;
use crate::error::Result;
use crate::metrics::BootstrapConfig;
use crate::rng::derive_seed_parts;
use crate::trainers::train;

use super::common::{csv_text, fmt_opt, in_pool, json_text};
use super::config::{AuditSection, BenchmarkConfig};
use super::io::write_atomic;
use super::source::load_dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditOutcome {
    pub table: AuditTable,
    pub proxies: Vec<ProxyReport>,
}

/// Audits the configured dataset; without an `[audit]` section the
/// protected group is audited on its own.
pub fn audit(cfg: &BenchmarkConfig) -> Result<AuditOutcome> {
    cfg.validate()?;
    let section = cfg.audit.clone().unwrap_or_default();
    in_pool(cfg.workers, || {
        let dataset = load_dataset(cfg)?;
        let bcfg =
            BootstrapConfig { iters: section.iters, seed: derive_seed_parts(cfg.seed, &["audit"]), level: 0.95 };
        let a = Attribute::from_dataset(&dataset, &section.attribute_a)?;
        let b = match &section.attribute_b {
            Some(name) => Attribute::from_dataset(&dataset, name)?,
            None => Attribute::new("none", vec!["all".into(); dataset.len()]),
        };
        let gold = dataset
            .samples()
            .iter()
            .enumerate()
            .map(|(i, s)| {
                s.gold_label
                    .ok_or_else(|| crate::error::Error::data(format!("sample {i} has no gold label to audit against")))
            })
            .collect::<Result<Vec<_>>>()?;
        let observed: Vec<bool> = dataset.samples().iter().map(|s| s.label).collect();
        let table = labeller_ppv(&observed, &gold, &a, &b, &bcfg)?;
        let proxies = proxy_reports(cfg, &section, &dataset)?;
        Ok(AuditOutcome { table, proxies })
    })
}

fn proxy_reports(cfg: &BenchmarkConfig, section: &AuditSection, dataset: &crate::data::Dataset) -> Result<Vec<ProxyReport>> {
    if section.proxies.is_empty() {
        return Ok(Vec::new());
    }
    let dataset = split(dataset, &cfg.split_plan())?;
    let mut tc = cfg.train.train_config(section.method);
    tc.seed = derive_seed_parts(cfg.seed, &["audit", section.method.name()]);
    let trained = train(&tc, &dataset)?;
    let test = dataset.test_indices();
    let scores = trained.scores(&dataset, &test)?;
    section
        .proxies
        .iter()
        .map(|p| proxy_evaluate(&dataset, &test, scores.clone(), p, &cfg.metric_params(), &cfg.bootstrap_config()))
        .collect()
}

/// [`audit`], writing `audit.csv`, `audit_heatmap.csv` and, when proxies
/// are evaluated, `proxy_metrics.csv` and `proxy_calibration.csv`.
pub fn run_audit(cfg: &BenchmarkConfig) -> Result<AuditOutcome> {
    let out = audit(cfg)?;
    let dir = cfg.output_dir();
    write_atomic(&dir.join("audit.csv"), out.table.to_long_csv()?.as_bytes())?;
    write_atomic(&dir.join("audit_heatmap.csv"), out.table.to_heatmap_csv()?.as_bytes())?;
    write_atomic(&dir.join("audit.json"), &json_text(&out)?)?;
    if !out.proxies.is_empty() {
        let metrics = csv_text(
            &["proxy", "group", "metric", "point", "ci_low", "ci_high"],
            out.proxies.iter().flat_map(|p| {
                p.values.iter().map(move |v| {
                    vec![p.proxy.clone(), v.group.clone(), v.metric.clone(), v.point.to_string(), fmt_opt(v.ci_low), fmt_opt(v.ci_high)]
                })
            }),
        )?;
        write_atomic(&dir.join("proxy_metrics.csv"), &metrics)?;
        let mut rows = Vec::new();
        for p in &out.proxies {
            for (g, c) in p.groups.iter().zip(&p.curves) {
                for b in 0..c.n_bins() {
                    let ci = c.ci.as_ref().and_then(|v| v[b]);
                    rows.push(vec![
                        p.proxy.clone(),
                        g.clone(),
                        b.to_string(),
                        c.counts[b].to_string(),
                        fmt_opt(c.mean_score[b]),
                        fmt_opt(c.positive_rate[b]),
                        fmt_opt(ci.map(|x| x.0)),
                        fmt_opt(ci.map(|x| x.1)),
                    ]);
                }
            }
        }
        let cal = csv_text(
            &["proxy", "group", "bin", "count", "mean_score", "positive_rate", "ci_low", "ci_high"],
            rows,
        )?;
        write_atomic(&dir.join("proxy_calibration.csv"), &cal)?;
    }
    Ok(out)
}
