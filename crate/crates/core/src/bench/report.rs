//! Human-readable summary of a run directory.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::metrics::{Metric, Orientation, ALL_GROUPS, WORST_GROUP};

use super::run::RunReport;

fn read(dir: &Path, name: &str) -> Result<String> {
    let p = dir.join(name);
    std::fs::read_to_string(&p).map_err(|e| Error::io(p, e))
}

fn ci(lo: Option<f64>, hi: Option<f64>) -> String {
    match (lo, hi) {
        (Some(l), Some(h)) => format!("[{l:.4}, {h:.4}]"),
        _ => String::new(),
    }
}

/// Renders the per-group table of every method, flagging each metric's
/// worst group, followed by pooled values and the minimax comparison
/// against the baseline.
pub fn render_report(dir: &Path) -> Result<String> {
    if !dir.join("manifest.json").is_file() {
        return Err(Error::config(format!("{} has no manifest.json; is it a run directory?", dir.display())));
    }
    let report: RunReport = serde_json::from_str(&read(dir, "report.json")?)?;
    let mut out = String::new();
    let w = &mut out;
    writeln!(w, "task: {}  baseline: {}", report.task, report.baseline).ok();
    writeln!(w, "bootstrap: {}", report.bootstrap_policy).ok();
    for m in &report.methods {
        let r = &m.report;
        let hp = super::config::point_key(&r.hyperparameters);
        writeln!(w).ok();
        writeln!(w, "== {} {}", r.method, if hp.is_empty() { String::new() } else { format!("({hp})") }).ok();
        writeln!(w, "{:<16} {:<22} {:>8}  {:<20} {}", "group", "metric", "point", "95% CI", "").ok();
        let metrics: Vec<&str> = {
            let mut v: Vec<&str> = Vec::new();
            for x in &r.values {
                if !v.contains(&x.metric.as_str()) {
                    v.push(&x.metric);
                }
            }
            v
        };
        for g in &r.groups {
            for &name in &metrics {
                let metric: Metric = name.parse()?;
                let worst = metric.orientation() != Orientation::Neutral
                    && r.worst(metric).is_ok_and(|(wg, _)| &wg == g);
                let flag = if worst { "<- worst" } else { "" };
                match r.get(metric, g) {
                    Some(v) => writeln!(w, "{g:<16} {name:<22} {:>8.4}  {:<20} {flag}", v.point, ci(v.ci_low, v.ci_high)),
                    None => writeln!(w, "{g:<16} {name:<22} {:>8}  {:<20} {flag}", "absent", ""),
                }
                .ok();
            }
        }
        for special in [ALL_GROUPS, WORST_GROUP] {
            for v in r.values.iter().filter(|v| v.group == special) {
                writeln!(w, "  {special} {}: {:.4} {}", v.metric, v.point, ci(v.ci_low, v.ci_high)).ok();
            }
        }
        for x in &m.minimax {
            writeln!(
                w,
                "  minimax {} vs {}: {} ({}: {:.4} vs {}: {:.4}), margin {:.4} [{:.4}, {:.4}]",
                x.metric,
                report.baseline,
                if x.fairer { "fairer" } else { "not fairer" },
                x.h_worst_group,
                x.h_worst,
                x.baseline_worst_group,
                x.baseline_worst,
                x.margin,
                x.ci_low,
                x.ci_high
            )
            .ok();
        }
    }
    Ok(out)
}
