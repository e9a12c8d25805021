//! Labeller positive predictive value per protected group and intersection.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{percentile, BootstrapConfig};
use crate::rng::{derive_seed, rng_from_seed};

/// A categorical attribute over samples, with its level order.
#[derive(Debug, Clone, PartialEq)]
pub struct Attribute {
    pub name: String,
    pub values: Vec<String>,
    pub levels: Vec<String>,
}

impl Attribute {
    /// Levels in order of first appearance.
    pub fn new(name: impl Into<String>, values: Vec<String>) -> Self {
        let mut levels: Vec<String> = Vec::new();
        for v in &values {
            if !levels.contains(v) {
                levels.push(v.clone());
            }
        }
        Attribute { name: name.into(), values, levels }
    }

    /// Explicit level order; values outside `levels` are rejected.
    pub fn with_levels(name: impl Into<String>, values: Vec<String>, levels: Vec<String>) -> Result<Self> {
        let name = name.into();
        if let Some(v) = values.iter().find(|v| !levels.contains(v)) {
            return Err(Error::data(format!("attribute {name}: value {v:?} is not a declared level")));
        }
        Ok(Attribute { name, values, levels })
    }

    /// Reads `name` from a dataset: `group` is the protected group,
    /// anything else is looked up in each sample's attributes.
    pub fn from_dataset(dataset: &Dataset, name: &str) -> Result<Self> {
        if name == "group" {
            let vocab = dataset.group_vocab();
            let values = dataset.samples().iter().map(|s| vocab[s.group].clone()).collect();
            return Attribute::with_levels(name, values, vocab.to_vec());
        }
        let values = dataset
            .samples()
            .iter()
            .enumerate()
            .map(|(i, s)| {
                s.attributes
                    .get(name)
                    .cloned()
                    .ok_or_else(|| Error::data(format!("sample {i} has no attribute {name:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Attribute::new(name, values))
    }

    fn level_ids(&self) -> Vec<usize> {
        self.values
            .iter()
            .map(|v| self.levels.iter().position(|l| l == v).expect("validated level"))
            .collect()
    }
}

/// Label used for a marginal row or column.
pub const ALL_LEVELS: &str = "ALL";

/// PPV of one cell. `ppv` and `ci` are absent when the cell is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditCell {
    pub a: String,
    pub b: String,
    pub ppv: Option<f64>,
    pub ci: Option<(f64, f64)>,
    /// Labeller-positive samples in the cell.
    pub n: usize,
    /// Of those, gold positives.
    pub gold_positive: usize,
}

/// PPV over the levels of two attributes, their marginals, and overall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditTable {
    pub attribute_a: String,
    pub attribute_b: String,
    pub levels_a: Vec<String>,
    pub levels_b: Vec<String>,
    /// Row-major over `levels_a × levels_b`.
    pub cells: Vec<AuditCell>,
    pub margin_a: Vec<AuditCell>,
    pub margin_b: Vec<AuditCell>,
    pub overall: AuditCell,
}

impl AuditTable {
    pub fn cell(&self, a: &str, b: &str) -> Option<&AuditCell> {
        self.all_cells().find(|c| c.a == a && c.b == b)
    }

    /// Every cell: intersections, then A marginals, B marginals, overall.
    pub fn all_cells(&self) -> impl Iterator<Item = &AuditCell> {
        self.cells
            .iter()
            .chain(&self.margin_a)
            .chain(&self.margin_b)
            .chain(std::iter::once(&self.overall))
    }

    /// Long format: `attr_a,attr_b,ppv,ci_low,ci_high,n`; absent values are empty.
    pub fn to_long_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([self.attribute_a.as_str(), self.attribute_b.as_str(), "ppv", "ci_low", "ci_high", "n"])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for c in self.all_cells() {
            w.write_record([
                c.a.clone(),
                c.b.clone(),
                opt(c.ppv),
                opt(c.ci.map(|x| x.0)),
                opt(c.ci.map(|x| x.1)),
                c.n.to_string(),
            ])?;
        }
        finish(w)
    }

    /// Matrix of PPVs with A levels as rows and B levels (plus `ALL`) as
    /// columns, for heatmap rendering.
    pub fn to_heatmap_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![self.attribute_a.clone()];
        header.extend(self.levels_b.iter().cloned());
        header.push(ALL_LEVELS.into());
        w.write_record(&header)?;
        let opt = |c: Option<&AuditCell>| c.and_then(|c| c.ppv).map(|x| x.to_string()).unwrap_or_default();
        let rows = self.levels_a.iter().map(String::as_str).chain(std::iter::once(ALL_LEVELS));
        for a in rows {
            let mut rec = vec![a.to_owned()];
            for b in self.levels_b.iter().map(String::as_str).chain(std::iter::once(ALL_LEVELS)) {
                rec.push(opt(self.cell(a, b)));
            }
            w.write_record(&rec)?;
        }
        finish(w)
    }
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::data(format!("csv writer: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Counts `(labeller positives, gold positives)` for every cell, laid out as
/// intersections, A marginals, B marginals, overall.
fn tally(rows: impl Iterator<Item = (usize, usize, bool)>, na: usize, nb: usize) -> Vec<(usize, usize)> {
    let mut t = vec![(0usize, 0usize); na * nb + na + nb + 1];
    for (a, b, gold) in rows {
        for k in [a * nb + b, na * nb + a, na * nb + na + b, na * nb + na + nb] {
            t[k].0 += 1;
            t[k].1 += gold as usize;
        }
    }
    t
}

/// Labeller PPV `P(gold = 1 | observed = 1)` per cell of `a × b`, with
/// bootstrap intervals over the labeller-positive samples.
pub fn labeller_ppv(
    observed: &[bool],
    gold: &[bool],
    a: &Attribute,
    b: &Attribute,
    cfg: &BootstrapConfig,
) -> Result<AuditTable> {
    cfg.validate()?;
    let n = observed.len();
    for (what, len) in [("gold labels", gold.len()), (a.name.as_str(), a.values.len()), (b.name.as_str(), b.values.len())] {
        if len != n {
            return Err(Error::data(format!("{what}: expected {n} values, found {len}")));
        }
    }
    let (ai, bi) = (a.level_ids(), b.level_ids());
    let (na, nb) = (a.levels.len(), b.levels.len());
    let positives: Vec<(usize, usize, bool)> = (0..n).filter(|&i| observed[i]).map(|i| (ai[i], bi[i], gold[i])).collect();
    let point = tally(positives.iter().copied(), na, nb);

    let m = positives.len();
    let draws: Vec<Vec<(usize, usize)>> = if m == 0 {
        Vec::new()
    } else {
        (0..cfg.iters)
            .into_par_iter()
            .map(|it| {
                let mut rng = rng_from_seed(derive_seed(cfg.seed, &(it as u64).to_le_bytes()));
                tally((0..m).map(|_| positives[rng.random_range(0..m)]), na, nb)
            })
            .collect()
    };
    let tail = (1.0 - cfg.level) / 2.0;
    let make = |k: usize, la: &str, lb: &str| -> AuditCell {
        let (count, gold_pos) = point[k];
        let ppv = (count > 0).then(|| gold_pos as f64 / count as f64);
        let ci = ppv.map(|p| {
            let mut v: Vec<f64> = draws
                .iter()
                .filter(|d| d[k].0 > 0)
                .map(|d| d[k].1 as f64 / d[k].0 as f64)
                .collect();
            if v.is_empty() {
                return (p, p);
            }
            v.sort_by(f64::total_cmp);
            (percentile(&v, tail).min(p), percentile(&v, 1.0 - tail).max(p))
        });
        AuditCell { a: la.to_owned(), b: lb.to_owned(), ppv, ci, n: count, gold_positive: gold_pos }
    };

    let mut cells = Vec::with_capacity(na * nb);
    for (x, la) in a.levels.iter().enumerate() {
        for (y, lb) in b.levels.iter().enumerate() {
            cells.push(make(x * nb + y, la, lb));
        }
    }
    let margin_a = a.levels.iter().enumerate().map(|(x, la)| make(na * nb + x, la, ALL_LEVELS)).collect();
    let margin_b = b.levels.iter().enumerate().map(|(y, lb)| make(na * nb + na + y, ALL_LEVELS, lb)).collect();
    let overall = make(na * nb + na + nb, ALL_LEVELS, ALL_LEVELS);
    Ok(AuditTable {
        attribute_a: a.name.clone(),
        attribute_b: b.name.clone(),
        levels_a: a.levels.clone(),
        levels_b: b.levels.clone(),
        cells,
        margin_a,
        margin_b,
        overall,
    })
}

/// [`labeller_ppv`] on a dataset's observed and gold labels.
pub fn audit_dataset(dataset: &Dataset, attribute_a: &str, attribute_b: &str, cfg: &BootstrapConfig) -> Result<AuditTable> {
    let gold = dataset
        .samples()
        .iter()
        .enumerate()
        .map(|(i, s)| s.gold_label.ok_or_else(|| Error::data(format!("sample {i} has no gold label to audit against"))))
        .collect::<Result<Vec<_>>>()?;
    let observed: Vec<bool> = dataset.samples().iter().map(|s| s.label).collect();
    let a = Attribute::from_dataset(dataset, attribute_a)?;
    let b = Attribute::from_dataset(dataset, attribute_b)?;
    labeller_ppv(&observed, &gold, &a, &b, cfg)
}
