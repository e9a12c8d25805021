//! Per-batch training objectives and their analytic gradients.
//!
//! Each [`Objective`] is a loss of the main scorer on one batch (plus, for
//! the two adversarial methods, a loss of the adversary). [`evaluate`]
//! returns values and gradients; it is the only place training gradients
//! are produced, so finite-difference checks of it cover training.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::numerics::{sample_bce, Batch, GradSet, Mlp, Scorer, BCE_CLAMP};

use super::penalties::{arl_weights, lagrangian_penalty, mean_match_penalty, median_bandwidth, mmd_penalty, softmax};

/// A batch together with each sample's group id.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupBatch {
    pub batch: Batch,
    pub groups: Vec<usize>,
    pub n_groups: usize,
}

impl GroupBatch {
    pub fn new(batch: Batch, groups: Vec<usize>, n_groups: usize) -> Result<Self> {
        if groups.len() != batch.len() {
            return Err(Error::Shape { context: "batch groups", expected: batch.len(), found: groups.len() });
        }
        if let Some(g) = groups.iter().find(|&&g| g >= n_groups) {
            return Err(Error::data(format!("group id {g} out of range for {n_groups} groups")));
        }
        Ok(GroupBatch { batch, groups, n_groups })
    }

    /// Gathers dataset rows. `weights`, if given, is indexed by dataset row.
    pub fn from_indices(dataset: &Dataset, indices: &[usize], weights: Option<&[f64]>) -> Result<Self> {
        let samples = dataset.samples();
        let batch = Batch::new(
            dataset.feature_matrix(indices),
            dataset.feature_dim(),
            indices.iter().map(|&i| samples[i].label).collect(),
            indices.iter().map(|&i| weights.map_or(1.0, |w| w[i])).collect(),
        )?;
        GroupBatch::new(batch, indices.iter().map(|&i| samples[i].group).collect(), dataset.n_groups())
    }

    pub fn len(&self) -> usize {
        self.batch.len()
    }

    pub fn is_empty(&self) -> bool {
        self.batch.is_empty()
    }
}

/// The loss minimised by the main scorer for one step.
#[derive(Debug, Clone, Copy)]
pub enum Objective<'a> {
    /// Weighted BCE. Used by ERM, Balanced ERM, Stratified ERM and JTT.
    Bce,
    /// BCE + λ · MMD penalty. `bandwidth: None` uses the median heuristic on
    /// the batch scores, held constant for the gradient.
    Mmd { lambda: f64, bandwidth: Option<f64> },
    /// BCE + λ · mean-matching penalty.
    MeanMatch { lambda: f64 },
    /// FairALM primal: BCE + Σ μ c + (ρ/2) Σ c².
    Lagrangian { mu: &'a [f64], rho: f64 },
    /// BCE − α · L_adv, where the adversary predicts G from (S, Y).
    Adversarial { alpha: f64, adversary: &'a Mlp },
    /// ARL weighted loss Σ w ℓ / Σ w with adversary weights.
    Arl { adversary: &'a Mlp },
    /// Σ_g q_g L_g over per-group mean losses.
    GroupDro { q: &'a [f64] },
}

/// Result of [`evaluate`].
#[derive(Debug, Clone)]
pub struct Evaluation {
    /// Objective of the main scorer.
    pub loss: f64,
    /// Weighted BCE of the batch, for logging.
    pub bce: f64,
    /// Penalty or adversary term, unscaled.
    pub penalty: f64,
    pub grads: GradSet,
    /// Objective the adversary minimises, when there is one.
    pub adversary_loss: Option<f64>,
    pub adversary_grads: Option<GradSet>,
    /// Weighted mean BCE per group; `None` for groups absent from the batch.
    pub group_losses: Vec<Option<f64>>,
    /// FairALM constraint values `c_{g,y}` at this batch.
    pub constraints: Option<Vec<f64>>,
    pub empty_cells: Vec<(usize, bool)>,
    pub bandwidth: Option<f64>,
}

fn label_value(y: bool) -> f64 {
    if y {
        1.0
    } else {
        0.0
    }
}

/// `∂/∂z_i Σ_j e_j ℓ_j` for unnormalised weights `e`, zero where the loss clamp is active.
fn weighted_logit_grads(scores: &[f64], labels: &[bool], e: &[f64]) -> Vec<f64> {
    scores
        .iter()
        .zip(labels)
        .zip(e)
        .map(|((&s, &y), &w)| {
            if (BCE_CLAMP..=1.0 - BCE_CLAMP).contains(&s) {
                w * (s - label_value(y))
            } else {
                0.0
            }
        })
        .collect()
}

fn group_losses(losses: &[f64], weights: &[f64], groups: &[usize], n_groups: usize) -> Vec<Option<f64>> {
    let mut num = vec![0.0; n_groups];
    let mut den = vec![0.0; n_groups];
    for ((&l, &w), &g) in losses.iter().zip(weights).zip(groups) {
        num[g] += w * l;
        den[g] += w;
    }
    num.into_iter().zip(den).map(|(n, d)| (d > 0.0).then(|| n / d)).collect()
}

/// Adversary input for the equalized-odds adversary: `(S, Y)`.
fn eo_input(score: f64, label: bool) -> [f64; 2] {
    [score, label_value(label)]
}

/// Adversary input for ARL: features followed by the label.
fn arl_input(row: &[f64], label: bool) -> Vec<f64> {
    let mut x = row.to_vec();
    x.push(label_value(label));
    x
}

/// Builds the adversary network a method needs.
pub fn adversary_for(method_is_arl: bool, feature_dim: usize, n_groups: usize, hidden: usize, seed: u64) -> Result<Mlp> {
    if method_is_arl {
        Mlp::init(&[feature_dim + 1, hidden, 1], seed)
    } else {
        Mlp::init(&[2, hidden, n_groups], seed)
    }
}

/// Values and gradients of `objective` for `scorer` on `gb`.
pub fn evaluate(objective: &Objective<'_>, scorer: &Scorer, gb: &GroupBatch) -> Result<Evaluation> {
    let b = &gb.batch;
    if b.is_empty() {
        return Err(Error::data("cannot evaluate an objective on an empty batch"));
    }
    let pass = scorer.forward_batch(&b.features)?;
    let scores = &pass.scores;
    let n = b.len();
    let losses: Vec<f64> = scores.iter().zip(&b.labels).map(|(&s, &y)| sample_bce(s, y)).collect();
    let total_w: f64 = b.weights.iter().sum();
    let bce = if total_w > 0.0 {
        losses.iter().zip(&b.weights).map(|(l, w)| l * w).sum::<f64>() / total_w
    } else {
        0.0
    };
    let bce_grads = || -> Vec<f64> {
        if total_w > 0.0 {
            let e: Vec<f64> = b.weights.iter().map(|w| w / total_w).collect();
            weighted_logit_grads(scores, &b.labels, &e)
        } else {
            vec![0.0; n]
        }
    };
    let groups_l = group_losses(&losses, &b.weights, &gb.groups, gb.n_groups);

    let mut out = Evaluation {
        loss: bce,
        bce,
        penalty: 0.0,
        grads: GradSet::zeros_like(scorer.net()),
        adversary_loss: None,
        adversary_grads: None,
        group_losses: groups_l,
        constraints: None,
        empty_cells: Vec::new(),
        bandwidth: None,
    };

    let add_score_penalty = |d_logits: &mut Vec<f64>, grad: &[f64], scale: f64| {
        let extra: Vec<f64> = grad.iter().map(|g| g * scale).collect();
        for (d, e) in d_logits.iter_mut().zip(pass.score_to_logit_grads(&extra)) {
            *d += e;
        }
    };

    let d_logits = match *objective {
        Objective::Bce => bce_grads(),
        Objective::Mmd { lambda, bandwidth } => {
            let mut d = bce_grads();
            if lambda != 0.0 {
                let bw = bandwidth.unwrap_or_else(|| median_bandwidth(scores));
                let p = mmd_penalty(scores, &b.labels, &gb.groups, gb.n_groups, bw)?;
                add_score_penalty(&mut d, &p.grad, lambda);
                out.penalty = p.value;
                out.loss = bce + lambda * p.value;
                out.empty_cells = p.empty_cells;
                out.bandwidth = Some(bw);
            }
            d
        }
        Objective::MeanMatch { lambda } => {
            let mut d = bce_grads();
            if lambda != 0.0 {
                let p = mean_match_penalty(scores, &b.labels, &gb.groups, gb.n_groups)?;
                add_score_penalty(&mut d, &p.grad, lambda);
                out.penalty = p.value;
                out.loss = bce + lambda * p.value;
                out.empty_cells = p.empty_cells;
            }
            d
        }
        Objective::Lagrangian { mu, rho } => {
            let mut d = bce_grads();
            let (c, _) = super::penalties::cell_constraints(scores, &b.labels, &gb.groups, gb.n_groups)?;
            if rho != 0.0 || mu.iter().any(|&m| m != 0.0) {
                let p = lagrangian_penalty(scores, &b.labels, &gb.groups, gb.n_groups, mu, rho)?;
                add_score_penalty(&mut d, &p.grad, 1.0);
                out.penalty = p.value;
                out.loss = bce + p.value;
                out.empty_cells = p.empty_cells;
            }
            out.constraints = Some(c);
            d
        }
        Objective::Adversarial { alpha, adversary } => {
            if adversary.input_dim() != 2 || adversary.output_dim() != gb.n_groups {
                return Err(Error::Shape {
                    context: "adversary outputs",
                    expected: gb.n_groups,
                    found: adversary.output_dim(),
                });
            }
            let mut adv_grads = GradSet::zeros_like(adversary);
            let mut d_scores = vec![0.0; n];
            let mut l_adv = 0.0;
            for i in 0..n {
                let trace = adversary.trace(&eo_input(scores[i], b.labels[i]))?;
                let p = softmax(trace.output());
                let g = gb.groups[i];
                l_adv -= p[g].max(f64::MIN_POSITIVE).ln() / n as f64;
                let d_out: Vec<f64> = p
                    .iter()
                    .enumerate()
                    .map(|(k, &pk)| (pk - if k == g { 1.0 } else { 0.0 }) / n as f64)
                    .collect();
                let d_in = adversary.backprop(&trace, &d_out, &mut adv_grads);
                d_scores[i] = d_in[0];
            }
            let mut d = bce_grads();
            if alpha != 0.0 {
                add_score_penalty(&mut d, &d_scores, -alpha);
                out.loss = bce - alpha * l_adv;
            }
            out.penalty = l_adv;
            out.adversary_loss = Some(l_adv);
            out.adversary_grads = Some(adv_grads);
            d
        }
        Objective::Arl { adversary } => {
            if adversary.input_dim() != b.dim + 1 || adversary.output_dim() != 1 {
                return Err(Error::Shape {
                    context: "ARL adversary input",
                    expected: b.dim + 1,
                    found: adversary.input_dim(),
                });
            }
            let traces = (0..n)
                .map(|i| adversary.trace(&arl_input(b.row(i), b.labels[i])))
                .collect::<Result<Vec<_>>>()?;
            let a: Vec<f64> = traces.iter().map(|t| t.output()[0]).collect();
            let w = arl_weights(&a);
            let sum_w: f64 = w.iter().sum();
            let objective: f64 = w.iter().zip(&losses).map(|(w, l)| w * l).sum::<f64>() / sum_w;
            // dO/da_j = n p_j (ℓ_j − Σ p ℓ) / Σw; the adversary ascends O.
            let p = softmax(&a);
            let mean_pl: f64 = p.iter().zip(&losses).map(|(p, l)| p * l).sum();
            let mut adv_grads = GradSet::zeros_like(adversary);
            for (j, t) in traces.iter().enumerate() {
                let d_a = n as f64 * p[j] * (losses[j] - mean_pl) / sum_w;
                adversary.backprop(t, &[-d_a], &mut adv_grads);
            }
            let e: Vec<f64> = w.iter().map(|w| w / sum_w).collect();
            out.loss = objective;
            out.penalty = objective - bce;
            out.adversary_loss = Some(-objective);
            out.adversary_grads = Some(adv_grads);
            weighted_logit_grads(scores, &b.labels, &e)
        }
        Objective::GroupDro { q } => {
            if q.len() != gb.n_groups {
                return Err(Error::Shape { context: "group weights", expected: gb.n_groups, found: q.len() });
            }
            let mut den = vec![0.0; gb.n_groups];
            for (&w, &g) in b.weights.iter().zip(&gb.groups) {
                den[g] += w;
            }
            let e: Vec<f64> = b
                .weights
                .iter()
                .zip(&gb.groups)
                .map(|(&w, &g)| if den[g] > 0.0 { q[g] * w / den[g] } else { 0.0 })
                .collect();
            out.loss = e.iter().zip(&losses).map(|(e, l)| e * l).sum();
            out.penalty = out.loss - bce;
            weighted_logit_grads(scores, &b.labels, &e)
        }
    };

    out.grads = pass.backward_logits(scorer, &d_logits)?;
    Ok(out)
}
