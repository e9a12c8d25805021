//! Proxy labels derived from gold labels through per-group flip channels.

use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed_parts, rng_from_seed};

use super::bias::FlipRates;
use super::dataset::Dataset;

/// One named proxy: per-group flip rates keyed by group name. Groups not
/// listed keep the gold label unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxyDef {
    pub name: String,
    #[serde(default)]
    pub flips: BTreeMap<String, FlipRates>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxySpec {
    #[serde(default)]
    pub name: String,
    pub proxies: Vec<ProxyDef>,
}

const PRESETS: &[(&str, &str)] = &[("mimic-proxy", include_str!("../../presets/mimic-proxy.toml"))];

impl ProxySpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ProxySpec = toml::from_str(text)?;
        for p in &spec.proxies {
            for (g, f) in &p.flips {
                if !(0.0..=1.0).contains(&f.pos_to_neg) || !(0.0..=1.0).contains(&f.neg_to_pos) {
                    return Err(Error::config(format!("proxy {}: group {g} has a flip rate outside [0, 1]", p.name)));
                }
            }
        }
        Ok(spec)
    }

    pub fn preset(name: &str) -> Result<Self> {
        PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::config(format!("unknown proxy preset {name:?}")))
            .and_then(|(_, t)| Self::from_toml(t))
    }

    pub fn preset_names() -> Vec<&'static str> {
        PRESETS.iter().map(|(n, _)| *n).collect()
    }
}

/// Adds every proxy in `spec` to each sample, starting from its gold label.
pub fn attach_proxies(dataset: &Dataset, spec: &ProxySpec, seed: u64) -> Result<Dataset> {
    if let Some(i) = dataset.samples().iter().position(|s| s.gold_label.is_none()) {
        return Err(Error::data(format!("sample {i} has no gold label to derive proxies from")));
    }
    let mut out = dataset.clone();
    for proxy in &spec.proxies {
        let mut per_group = vec![FlipRates::default(); dataset.n_groups()];
        for (name, rates) in &proxy.flips {
            let g = dataset
                .group_index(name)
                .ok_or_else(|| Error::config(format!("proxy {}: unknown group {name:?}", proxy.name)))?;
            per_group[g] = *rates;
        }
        let mut rng = rng_from_seed(derive_seed_parts(seed, &["proxy", &proxy.name]));
        for s in out.samples_mut() {
            let gold = s.gold_label.expect("checked above");
            let v = per_group[s.group].apply(gold, rng.random::<f64>());
            s.proxies.insert(proxy.name.clone(), v);
        }
    }
    Ok(out)
}
