//! Generative recipe for synthetic biased datasets.
//!
//! Each sample draws a group, a gold label from the group's prevalence, and
//! features from a class-conditional Gaussian whose noise is scaled by the
//! group's difficulty. The observed label is the gold label passed through a
//! per-group asymmetric flip channel, and the gold label is kept on the
//! sample so that label bias can be audited later.

use std::collections::BTreeSet;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

use super::dataset::{Dataset, Sample};

/// Asymmetric label-noise channel.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FlipRates {
    /// `P(observed = 0 | gold = 1)`.
    pub pos_to_neg: f64,
    /// `P(observed = 1 | gold = 0)`.
    pub neg_to_pos: f64,
}

impl FlipRates {
    pub fn new(pos_to_neg: f64, neg_to_pos: f64) -> Self {
        FlipRates { pos_to_neg, neg_to_pos }
    }

    pub fn is_zero(&self) -> bool {
        self.pos_to_neg == 0.0 && self.neg_to_pos == 0.0
    }

    /// Applies the channel given a uniform draw in `[0, 1)`.
    pub fn apply(&self, gold: bool, u: f64) -> bool {
        if gold {
            u >= self.pos_to_neg
        } else {
            u < self.neg_to_pos
        }
    }

    /// Prevalence after the channel for a gold prevalence `p`:
    /// `p (1 - f10) + (1 - p) f01`.
    pub fn observed_prevalence(&self, p: f64) -> f64 {
        p * (1.0 - self.pos_to_neg) + (1.0 - p) * self.neg_to_pos
    }

    /// `P(gold = 1 | observed = 1)` for gold prevalence `p`.
    pub fn ppv(&self, p: f64) -> f64 {
        let tp = p * (1.0 - self.pos_to_neg);
        let fp = (1.0 - p) * self.neg_to_pos;
        tp / (tp + fp)
    }

    fn validate(&self, what: &str) -> Result<()> {
        for (name, v) in [("pos_to_neg", self.pos_to_neg), ("neg_to_pos", self.neg_to_pos)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("{what}: flip rate {name} = {v} is outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Per-group part of a [`BiasSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub name: String,
    pub proportion: f64,
    /// Gold prevalence `P(Y = 1 | G = g)`.
    pub prevalence: f64,
    #[serde(default)]
    pub flip: FlipRates,
    /// Multiplies the feature noise standard deviation.
    #[serde(default = "one")]
    pub difficulty: f64,
    pub mean_pos: Vec<f64>,
    pub mean_neg: Vec<f64>,
}

fn one() -> f64 {
    1.0
}

/// An extra categorical attribute drawn independently of everything else.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    pub values: Vec<String>,
    pub proportions: Vec<f64>,
}

/// Full generative recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasSpec {
    #[serde(default)]
    pub name: String,
    /// Shared diagonal noise standard deviation per feature.
    pub noise_sd: Vec<f64>,
    pub groups: Vec<GroupSpec>,
    #[serde(default)]
    pub attributes: Vec<AttributeSpec>,
}

const PRESETS: &[(&str, &str)] = &[
    ("mimic-age-nofinding", include_str!("../../presets/mimic-age-nofinding.toml")),
    ("mimic-age-labelbias", include_str!("../../presets/mimic-age-labelbias.toml")),
    ("mimic-proxy-cohort", include_str!("../../presets/mimic-proxy-cohort.toml")),
    ("two-group-gap", include_str!("../../presets/two-group-gap.toml")),
    ("imbalanced-boundaries", include_str!("../../presets/imbalanced-boundaries.toml")),
];

fn check_simplex(values: &[f64], what: &str) -> Result<()> {
    if values.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::config(format!("{what}: proportions must lie in [0, 1]")));
    }
    let sum: f64 = values.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!("{what}: proportions sum to {sum}, expected 1")));
    }
    Ok(())
}

fn draw_categorical(cum: &[f64], u: f64) -> usize {
    cum.iter().position(|&c| u < c).unwrap_or(cum.len() - 1)
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    p.iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect()
}

impl BiasSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: BiasSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("bias spec serialises")
    }

    /// Names of the built-in presets.
    pub fn preset_names() -> Vec<&'static str> {
        PRESETS.iter().map(|(n, _)| *n).collect()
    }

    /// Loads a built-in preset by name.
    pub fn preset(name: &str) -> Result<Self> {
        let (_, text) = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown preset {name:?}; available: {}",
                    Self::preset_names().join(", ")
                ))
            })?;
        Self::from_toml(text)
    }

    pub fn feature_dim(&self) -> usize {
        self.noise_sd.len()
    }

    pub fn group_names(&self) -> Vec<String> {
        self.groups.iter().map(|g| g.name.clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.groups.len() < 2 {
            return Err(Error::config("a bias spec needs at least 2 groups"));
        }
        let d = self.feature_dim();
        if d == 0 {
            return Err(Error::config("noise_sd must have at least one entry"));
        }
        if self.noise_sd.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::config("noise_sd entries must be positive"));
        }
        let names: BTreeSet<&str> = self.groups.iter().map(|g| g.name.as_str()).collect();
        if names.len() != self.groups.len() {
            return Err(Error::config("group names must be unique"));
        }
        let props: Vec<f64> = self.groups.iter().map(|g| g.proportion).collect();
        check_simplex(&props, "group proportions")?;
        for g in &self.groups {
            if !(0.0..=1.0).contains(&g.prevalence) {
                return Err(Error::config(format!("group {}: prevalence {} outside [0, 1]", g.name, g.prevalence)));
            }
            g.flip.validate(&format!("group {}", g.name))?;
            if !(g.difficulty > 0.0 && g.difficulty.is_finite()) {
                return Err(Error::config(format!("group {}: difficulty must be positive", g.name)));
            }
            if g.mean_pos.len() != d || g.mean_neg.len() != d {
                return Err(Error::config(format!(
                    "group {}: mean vectors must have length {d}",
                    g.name
                )));
            }
        }
        for a in &self.attributes {
            if a.values.is_empty() || a.values.len() != a.proportions.len() {
                return Err(Error::config(format!(
                    "attribute {}: values and proportions must be nonempty and equally long",
                    a.name
                )));
            }
            check_simplex(&a.proportions, &format!("attribute {}", a.name))?;
        }
        Ok(())
    }

    /// Draws `n` i.i.d. samples. Bitwise reproducible for a fixed seed.
    pub fn generate(&self, n: usize, seed: u64) -> Result<Dataset> {
        self.validate()?;
        let k = self.groups.len();
        if n < 10 * k {
            return Err(Error::config(format!("need n >= {} for {k} groups, got {n}", 10 * k)));
        }
        let mut rng = rng_from_seed(seed);
        let group_cum = cumulative(&self.groups.iter().map(|g| g.proportion).collect::<Vec<_>>());
        let attr_cum: Vec<Vec<f64>> = self.attributes.iter().map(|a| cumulative(&a.proportions)).collect();
        let d = self.feature_dim();

        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            let g = draw_categorical(&group_cum, rng.random::<f64>());
            let spec = &self.groups[g];
            let gold = rng.random::<f64>() < spec.prevalence;
            let mean = if gold { &spec.mean_pos } else { &spec.mean_neg };
            let mut features = Vec::with_capacity(d);
            for j in 0..d {
                let z: f64 = rng.sample(StandardNormal);
                features.push(mean[j] + spec.difficulty * self.noise_sd[j] * z);
            }
            let label = spec.flip.apply(gold, rng.random::<f64>());
            let mut s = Sample::new(features, label, g);
            s.gold_label = Some(gold);
            for (a, cum) in self.attributes.iter().zip(&attr_cum) {
                let v = draw_categorical(cum, rng.random::<f64>());
                s.attributes.insert(a.name.clone(), a.values[v].clone());
            }
            samples.push(s);
        }
        // tiny n can miss a rare group entirely; report that as a data error
        Dataset::new(samples, self.group_names())
    }

    /// Log-likelihood ratio `ln p(x | Y=1, g) - ln p(x | Y=0, g)`.
    fn log_likelihood_ratio(&self, group: usize, x: &[f64]) -> f64 {
        let g = &self.groups[group];
        let mut llr = 0.0;
        for j in 0..self.feature_dim() {
            let var = (g.difficulty * self.noise_sd[j]).powi(2);
            let dp = x[j] - g.mean_pos[j];
            let dn = x[j] - g.mean_neg[j];
            llr += (dn * dn - dp * dp) / (2.0 * var);
        }
        llr
    }

    /// Bayes posterior `P(gold = 1 | x, g)` under the generative model.
    pub fn gold_posterior(&self, group: usize, x: &[f64]) -> f64 {
        let p = self.groups[group].prevalence;
        if p <= 0.0 {
            return 0.0;
        }
        if p >= 1.0 {
            return 1.0;
        }
        let logit = self.log_likelihood_ratio(group, x) + (p / (1.0 - p)).ln();
        crate::numerics::logistic(logit)
    }

    /// Bayes posterior `P(observed = 1 | x, g)`, i.e. the gold posterior
    /// pushed through the group's flip channel.
    pub fn observed_posterior(&self, group: usize, x: &[f64]) -> f64 {
        let q = self.gold_posterior(group, x);
        self.groups[group].flip.observed_prevalence(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses_and_validates() {
        for name in BiasSpec::preset_names() {
            let spec = BiasSpec::preset(name).unwrap();
            assert_eq!(spec.name, name);
        }
        assert!(BiasSpec::preset("nope").is_err());
    }

    #[test]
    fn age_preset_cohort_values() {
        let spec = BiasSpec::preset("mimic-age-nofinding").unwrap();
        let prev: Vec<f64> = spec.groups.iter().map(|g| g.prevalence).collect();
        let prop: Vec<f64> = spec.groups.iter().map(|g| g.proportion).collect();
        assert_eq!(prev, vec![0.6341, 0.4551, 0.3191, 0.2286]);
        assert_eq!(prop, vec![0.1475, 0.3235, 0.3941, 0.1349]);
    }

    #[test]
    fn validation_rejects_bad_specs() {
        let mut s = BiasSpec::preset("two-group-gap").unwrap();
        s.groups[0].proportion = 0.6;
        assert!(s.validate().is_err());
        let mut s = BiasSpec::preset("two-group-gap").unwrap();
        s.groups[1].flip.neg_to_pos = 1.5;
        assert!(s.validate().is_err());
        let mut s = BiasSpec::preset("two-group-gap").unwrap();
        s.groups[1].difficulty = 0.0;
        assert!(s.validate().is_err());
        let mut s = BiasSpec::preset("two-group-gap").unwrap();
        s.groups[0].mean_pos.push(1.0);
        assert!(s.validate().is_err());
        let s = BiasSpec::preset("two-group-gap").unwrap();
        assert!(s.generate(19, 0).is_err());
    }

    #[test]
    fn generation_is_reproducible() {
        let s = BiasSpec::preset("mimic-age-labelbias").unwrap();
        let a = s.generate(500, 3).unwrap();
        let b = s.generate(500, 3).unwrap();
        assert_eq!(a, b);
        let c = s.generate(500, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_flips_keep_gold() {
        let s = BiasSpec::preset("mimic-age-nofinding").unwrap();
        let d = s.generate(2_000, 1).unwrap();
        assert!(d.samples().iter().all(|x| x.gold_label == Some(x.label)));
    }

    #[test]
    fn flip_channel_closed_forms() {
        let f = FlipRates::new(0.1, 0.0);
        assert!((f.observed_prevalence(0.5) - 0.45).abs() < 1e-15);
        assert_eq!(f.ppv(0.5), 1.0);
        let f = FlipRates::new(0.0, 0.25);
        // 0.4 / (0.4 + 0.6 * 0.25)
        assert!((f.ppv(0.4) - 0.4 / 0.55).abs() < 1e-15);
    }

    #[test]
    fn toml_round_trip() {
        let s = BiasSpec::preset("mimic-age-labelbias").unwrap();
        assert_eq!(BiasSpec::from_toml(&s.to_toml()).unwrap(), s);
    }
}
