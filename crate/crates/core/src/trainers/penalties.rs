//! Fairness penalties on batch scores, with gradients with respect to the
//! scores, and the GroupDRO / FairALM / ARL weight updates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A penalty value, its gradient with respect to each score, and the
/// `(group, label)` cells that were empty in the batch and contributed 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Penalty {
    pub value: f64,
    pub grad: Vec<f64>,
    pub empty_cells: Vec<(usize, bool)>,
}

/// Smallest bandwidth the median heuristic may return.
pub const MIN_BANDWIDTH: f64 = 1e-3;

struct Cells {
    pooled: [Vec<usize>; 2],
    /// Indexed by `2 * group + label`.
    cells: Vec<Vec<usize>>,
}

fn partition(n_scores: usize, labels: &[bool], groups: &[usize], n_groups: usize) -> Result<Cells> {
    if labels.len() != n_scores {
        return Err(Error::Shape { context: "penalty labels", expected: n_scores, found: labels.len() });
    }
    if groups.len() != n_scores {
        return Err(Error::Shape { context: "penalty groups", expected: n_scores, found: groups.len() });
    }
    let mut pooled = [Vec::new(), Vec::new()];
    let mut cells = vec![Vec::new(); 2 * n_groups];
    for (i, (&y, &g)) in labels.iter().zip(groups).enumerate() {
        if g >= n_groups {
            return Err(Error::data(format!("group id {g} out of range for {n_groups} groups")));
        }
        pooled[y as usize].push(i);
        cells[2 * g + y as usize].push(i);
    }
    Ok(Cells { pooled, cells })
}

fn kernel(u: f64, v: f64, bw: f64) -> f64 {
    (-(u - v) * (u - v) / (2.0 * bw * bw)).exp()
}

/// Adds `coef · Σ_{i∈a, j∈b} k(s_i, s_j)` to `value` and its gradient to `grad`.
fn kernel_sum(scores: &[f64], a: &[usize], b: &[usize], coef: f64, bw: f64, grad: &mut [f64]) -> f64 {
    let mut total = 0.0;
    for &i in a {
        for &j in b {
            let k = kernel(scores[i], scores[j], bw);
            total += k;
            let d = coef * k * (scores[i] - scores[j]) / (bw * bw);
            grad[i] -= d;
            grad[j] += d;
        }
    }
    coef * total
}

fn check_bandwidth(bw: f64) -> Result<()> {
    if !(bw > 0.0 && bw.is_finite()) {
        return Err(Error::config(format!("kernel bandwidth must be positive, got {bw}")));
    }
    Ok(())
}

/// Biased squared MMD between two samples with the Gaussian kernel
/// `k(u, v) = exp(−(u − v)² / (2 σ²))`.
pub fn mmd2(x: &[f64], y: &[f64], bandwidth: f64) -> Result<f64> {
    check_bandwidth(bandwidth)?;
    if x.is_empty() || y.is_empty() {
        return Err(Error::data("mmd needs two nonempty samples"));
    }
    let mean_k = |a: &[f64], b: &[f64]| {
        a.iter().flat_map(|&u| b.iter().map(move |&v| kernel(u, v, bandwidth))).sum::<f64>()
            / (a.len() * b.len()) as f64
    };
    Ok(mean_k(x, x) + mean_k(y, y) - 2.0 * mean_k(x, y))
}

/// Median pairwise absolute difference of `scores`, floored at
/// [`MIN_BANDWIDTH`].
pub fn median_bandwidth(scores: &[f64]) -> f64 {
    let mut d: Vec<f64> = Vec::with_capacity(scores.len() * scores.len().saturating_sub(1) / 2);
    for i in 0..scores.len() {
        for j in i + 1..scores.len() {
            d.push((scores[i] - scores[j]).abs());
        }
    }
    if d.is_empty() {
        return MIN_BANDWIDTH;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    m.max(MIN_BANDWIDTH)
}

/// `Σ_y Σ_g MMD²(S | G=g, Y=y ; S | Y=y)` over the batch.
pub fn mmd_penalty(scores: &[f64], labels: &[bool], groups: &[usize], n_groups: usize, bandwidth: f64) -> Result<Penalty> {
    check_bandwidth(bandwidth)?;
    let parts = partition(scores.len(), labels, groups, n_groups)?;
    let mut grad = vec![0.0; scores.len()];
    let mut value = 0.0;
    let mut empty_cells = Vec::new();
    for (k, cell) in parts.cells.iter().enumerate() {
        let (g, y) = (k / 2, k % 2 == 1);
        if cell.is_empty() {
            empty_cells.push((g, y));
            continue;
        }
        let pooled = &parts.pooled[y as usize];
        let (m, n) = (cell.len() as f64, pooled.len() as f64);
        value += kernel_sum(scores, cell, cell, 1.0 / (m * m), bandwidth, &mut grad);
        value += kernel_sum(scores, pooled, pooled, 1.0 / (n * n), bandwidth, &mut grad);
        value += kernel_sum(scores, cell, pooled, -2.0 / (m * n), bandwidth, &mut grad);
    }
    Ok(Penalty { value, grad, empty_cells })
}

/// Per-cell constraint `c_{g,y} = mean(S | g, y) − mean(S | y)`, indexed by
/// `2g + y`. Empty cells have `c = 0` and are listed.
pub fn cell_constraints(scores: &[f64], labels: &[bool], groups: &[usize], n_groups: usize) -> Result<(Vec<f64>, Vec<(usize, bool)>)> {
    let parts = partition(scores.len(), labels, groups, n_groups)?;
    let mean = |idx: &[usize]| idx.iter().map(|&i| scores[i]).sum::<f64>() / idx.len() as f64;
    let mut empty = Vec::new();
    let c = parts
        .cells
        .iter()
        .enumerate()
        .map(|(k, cell)| {
            if cell.is_empty() {
                empty.push((k / 2, k % 2 == 1));
                0.0
            } else {
                mean(cell) - mean(&parts.pooled[k % 2])
            }
        })
        .collect();
    Ok((c, empty))
}

/// `Σ_k μ_k c_k + (ρ/2) Σ_k c_k²` with its score gradient.
pub fn lagrangian_penalty(
    scores: &[f64],
    labels: &[bool],
    groups: &[usize],
    n_groups: usize,
    mu: &[f64],
    rho: f64,
) -> Result<Penalty> {
    if mu.len() != 2 * n_groups {
        return Err(Error::Shape { context: "multipliers", expected: 2 * n_groups, found: mu.len() });
    }
    let parts = partition(scores.len(), labels, groups, n_groups)?;
    let (c, empty_cells) = cell_constraints(scores, labels, groups, n_groups)?;
    let mut grad = vec![0.0; scores.len()];
    let mut value = 0.0;
    for (k, cell) in parts.cells.iter().enumerate() {
        if cell.is_empty() {
            continue;
        }
        value += mu[k] * c[k] + 0.5 * rho * c[k] * c[k];
        let coef = mu[k] + rho * c[k];
        let pooled = &parts.pooled[k % 2];
        for &i in cell {
            grad[i] += coef / cell.len() as f64;
        }
        for &i in pooled {
            grad[i] -= coef / pooled.len() as f64;
        }
    }
    Ok(Penalty { value, grad, empty_cells })
}

/// `Σ_y Σ_g (mean(S | g, y) − mean(S | y))²`.
pub fn mean_match_penalty(scores: &[f64], labels: &[bool], groups: &[usize], n_groups: usize) -> Result<Penalty> {
    lagrangian_penalty(scores, labels, groups, n_groups, &vec![0.0; 2 * n_groups], 2.0)
}

/// GroupDRO's distribution over groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupWeights {
    pub q: Vec<f64>,
}

impl GroupWeights {
    pub fn uniform(n_groups: usize) -> Self {
        GroupWeights { q: vec![1.0 / n_groups as f64; n_groups] }
    }

    /// `q_g ← q_g exp(η L_g)`, renormalised. Groups with `None` loss (absent
    /// from the batch) keep their unnormalised weight.
    pub fn update(&mut self, losses: &[Option<f64>], eta: f64) -> Result<()> {
        if losses.len() != self.q.len() {
            return Err(Error::Shape { context: "group losses", expected: self.q.len(), found: losses.len() });
        }
        if !(eta >= 0.0 && eta.is_finite()) {
            return Err(Error::config(format!("eta must be finite and >= 0, got {eta}")));
        }
        if let Some(l) = losses.iter().flatten().find(|l| !l.is_finite()) {
            return Err(Error::NonFinite(format!("group loss {l}")));
        }
        let logits: Vec<f64> = self
            .q
            .iter()
            .zip(losses)
            .map(|(&q, l)| q.ln() + eta * l.unwrap_or(0.0))
            .collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let unnorm: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let total: f64 = unnorm.iter().sum();
        self.q = unnorm.into_iter().map(|u| u / total).collect();
        Ok(())
    }
}

/// Functional form of [`GroupWeights::update`] for fully observed losses.
pub fn groupdro_update(q: &GroupWeights, losses: &[f64], eta: f64) -> Result<GroupWeights> {
    let mut out = q.clone();
    out.update(&losses.iter().map(|&l| Some(l)).collect::<Vec<_>>(), eta)?;
    Ok(out)
}

/// FairALM multipliers, one per `(group, label)` constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub multipliers: Vec<f64>,
    pub penalty_coefficient: f64,
}

impl DualState {
    pub fn new(n_constraints: usize, rho: f64) -> Self {
        DualState { multipliers: vec![0.0; n_constraints], penalty_coefficient: rho }
    }

    /// Dual ascent `μ ← μ + η c`.
    pub fn update(&mut self, constraints: &[f64], eta: f64) -> Result<()> {
        if constraints.len() != self.multipliers.len() {
            return Err(Error::Shape {
                context: "constraints",
                expected: self.multipliers.len(),
                found: constraints.len(),
            });
        }
        for (m, c) in self.multipliers.iter_mut().zip(constraints) {
            *m += eta * c;
        }
        if self.multipliers.iter().any(|m| !m.is_finite()) {
            return Err(Error::NonFinite("FairALM multiplier".into()));
        }
        Ok(())
    }
}

/// Softmax probabilities of raw adversary outputs.
pub fn softmax(a: &[f64]) -> Vec<f64> {
    let max = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = a.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}

/// ARL sample weights `w_i = 1 + n · softmax(a)_i`; they are ≥ 1 and sum to `2n`.
pub fn arl_weights(a: &[f64]) -> Vec<f64> {
    let n = a.len() as f64;
    softmax(a).into_iter().map(|p| 1.0 + n * p).collect()
}
