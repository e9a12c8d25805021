//! Percentile bootstrap over test samples and ensemble members.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, Rng};

use super::calibration::{curve_of, CalibrationCurve};
use super::scored::{ScoredSet, Subset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub iters: usize,
    pub seed: u64,
    /// Central coverage of the interval, e.g. 0.95.
    pub level: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig { iters: 250, seed: 0, level: 0.95 }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iters == 0 {
            return Err(Error::config("bootstrap needs at least one iteration"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::config(format!("bootstrap level must lie in (0, 1), got {}", self.level)));
        }
        Ok(())
    }
}

/// Point estimate with a percentile interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Resamples discarded because the metric was undefined on them.
    pub redraws: usize,
}

impl Estimate {
    pub fn width(&self) -> f64 {
        self.ci_high - self.ci_low
    }

    pub fn contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }
}

/// Scores of several models on the same labelled samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    sets: Vec<ScoredSet>,
}

impl Ensemble {
    pub fn new(sets: Vec<ScoredSet>) -> Result<Self> {
        let first = sets.first().ok_or_else(|| Error::config("an ensemble needs at least one model"))?;
        if first.is_empty() {
            return Err(Error::data("an ensemble needs at least one sample"));
        }
        for s in &sets[1..] {
            if s.labels != first.labels || s.groups != first.groups || s.n_groups != first.n_groups {
                return Err(Error::data("ensemble members must score the same labelled samples"));
            }
        }
        Ok(Ensemble { sets })
    }

    /// Builds an ensemble from one score vector per model over `template`'s samples.
    pub fn from_scores(template: &ScoredSet, scores: Vec<Vec<f64>>) -> Result<Self> {
        let sets = scores
            .into_iter()
            .map(|s| {
                let mut set = ScoredSet::new(s, template.labels.clone(), template.groups.clone(), template.n_groups)?;
                set.threshold = template.threshold;
                Ok(set)
            })
            .collect::<Result<_>>()?;
        Ensemble::new(sets)
    }

    pub fn members(&self) -> &[ScoredSet] {
        &self.sets
    }

    pub fn n_models(&self) -> usize {
        self.sets.len()
    }

    pub fn n_samples(&self) -> usize {
        self.sets[0].len()
    }

    /// Per-sample mean score over the members.
    pub fn mean_scores(&self) -> ScoredSet {
        let m = self.sets.len() as f64;
        let mut out = self.sets[0].clone();
        for (i, s) in out.scores.iter_mut().enumerate() {
            *s = self.sets.iter().map(|set| set.scores[i]).sum::<f64>() / m;
        }
        out
    }

    /// Same models with labels replaced.
    pub fn relabel(&self, labels: &[bool]) -> Result<Ensemble> {
        Ensemble::new(self.sets.iter().map(|s| s.relabel(labels.to_vec())).collect::<Result<_>>()?)
    }
}

/// Linear-interpolation percentile of sorted data, `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let h = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn iteration_rng(seed: u64, i: usize) -> Rng {
    rng_from_seed(derive_seed(seed, &(i as u64).to_le_bytes()))
}

fn draw(rng: &mut Rng, n: usize, n_models: usize) -> (usize, Vec<usize>) {
    let m = rng.random_range(0..n_models);
    let idx = (0..n).map(|_| rng.random_range(0..n)).collect();
    (m, idx)
}

/// Runs `eval` on `cfg.iters` independent draws of (model index, resample),
/// redrawing when it reports an undefined metric. Results are ordered by
/// iteration index, so the outcome does not depend on scheduling.
fn resample<F>(n: usize, n_models: usize, cfg: &BootstrapConfig, eval: F) -> Result<(Vec<f64>, usize)>
where
    F: Fn(usize, &[usize]) -> Result<f64> + Sync,
{
    cfg.validate()?;
    let cap = 10 * cfg.iters;
    let results: Vec<(f64, usize)> = (0..cfg.iters)
        .into_par_iter()
        .map(|i| {
            let mut rng = iteration_rng(cfg.seed, i);
            let mut redraws = 0;
            loop {
                let (m, idx) = draw(&mut rng, n, n_models);
                match eval(m, &idx) {
                    Ok(v) => return Ok((v, redraws)),
                    Err(e) if e.is_metric() && redraws < cap => redraws += 1,
                    Err(e) => return Err(e),
                }
            }
        })
        .collect::<Result<_>>()?;
    let redraws: usize = results.iter().map(|r| r.1).sum();
    if redraws > cap {
        return Err(Error::UndefinedMetric {
            metric: "bootstrap".into(),
            subset: "resamples".into(),
            reason: format!("{redraws} undefined resamples exceed the cap of {cap}"),
        });
    }
    Ok((results.into_iter().map(|r| r.0).collect(), redraws))
}

fn summarise(point: f64, mut values: Vec<f64>, redraws: usize, level: f64) -> Estimate {
    values.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let lo = percentile(&values, tail);
    let hi = percentile(&values, 1.0 - tail);
    Estimate {
        point,
        ci_low: lo.min(point),
        ci_high: hi.max(point),
        redraws,
    }
}

fn mean_over_models<F>(metric: &F, ensemble: &Ensemble) -> Result<f64>
where
    F: Fn(&ScoredSet) -> Result<f64>,
{
    let mut total = 0.0;
    for s in ensemble.members() {
        total += metric(s)?;
    }
    Ok(total / ensemble.n_models() as f64)
}

/// Bootstrap estimate of `metric` for an ensemble.
///
/// Each iteration resamples the test samples with replacement and picks one
/// model uniformly. The point estimate is the metric on the full set,
/// averaged over models. The interval is widened if needed so that it
/// contains the point estimate.
pub fn bootstrap<F>(metric: F, ensemble: &Ensemble, cfg: &BootstrapConfig) -> Result<Estimate>
where
    F: Fn(&ScoredSet) -> Result<f64> + Sync,
{
    let point = mean_over_models(&metric, ensemble)?;
    let sets = ensemble.members();
    let (values, redraws) = resample(ensemble.n_samples(), ensemble.n_models(), cfg, |m, idx| {
        metric(&sets[m].select(idx))
    })?;
    Ok(summarise(point, values, redraws, cfg.level))
}

/// Bootstrap of `metric(h) − metric(baseline)` with shared draws.
///
/// Both ensembles see the same resample indices and the same model index in
/// every iteration, so they must have the same number of members.
pub fn paired_delta<F>(metric: F, h: &Ensemble, baseline: &Ensemble, cfg: &BootstrapConfig) -> Result<Estimate>
where
    F: Fn(&ScoredSet) -> Result<f64> + Sync,
{
    if h.n_models() != baseline.n_models() || h.n_samples() != baseline.n_samples() {
        return Err(Error::config(format!(
            "paired bootstrap needs matching ensembles, got {}x{} and {}x{}",
            h.n_models(),
            h.n_samples(),
            baseline.n_models(),
            baseline.n_samples()
        )));
    }
    let point = mean_over_models(&metric, h)? - mean_over_models(&metric, baseline)?;
    let (hs, bs) = (h.members(), baseline.members());
    let (values, redraws) = resample(h.n_samples(), h.n_models(), cfg, |m, idx| {
        Ok(metric(&hs[m].select(idx))? - metric(&bs[m].select(idx))?)
    })?;
    Ok(summarise(point, values, redraws, cfg.level))
}

/// Calibration curve of the ensemble-mean score with per-bin bootstrap
/// intervals on the positive rate.
pub fn calibration_curve_ci(
    ensemble: &Ensemble,
    subset: Subset,
    n_bins: usize,
    cfg: &BootstrapConfig,
) -> Result<CalibrationCurve> {
    cfg.validate()?;
    let mean = ensemble.mean_scores();
    let mut curve = super::calibration::calibration_curve(&mean, subset, n_bins)?;
    let sets = ensemble.members();
    let n = ensemble.n_samples();
    let draws: Vec<Vec<Option<f64>>> = (0..cfg.iters)
        .into_par_iter()
        .map(|i| {
            let mut rng = iteration_rng(cfg.seed, i);
            let (m, idx) = draw(&mut rng, n, ensemble.n_models());
            let s = sets[m].select(&idx);
            let (scores, labels) = s.restrict(subset);
            curve_of(&scores, &labels, n_bins).positive_rate
        })
        .collect();
    let tail = (1.0 - cfg.level) / 2.0;
    let ci = (0..n_bins)
        .map(|b| {
            let point = curve.positive_rate[b]?;
            let mut v: Vec<f64> = draws.iter().filter_map(|d| d[b]).collect();
            if v.is_empty() {
                return Some((point, point));
            }
            v.sort_by(f64::total_cmp);
            Some((percentile(&v, tail).min(point), percentile(&v, 1.0 - tail).max(point)))
        })
        .collect();
    curve.ci = Some(ci);
    Ok(curve)
}
