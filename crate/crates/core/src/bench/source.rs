use std::collections::BTreeSet;
use std::path::Path;

use crate::data::{attach_proxies, load_csv, BiasSpec, Dataset, ProxySpec, Sample};
use crate::error::{Error, Result};
use crate::rng::derive_seed_parts;

use super::config::BenchmarkConfig;

fn proxy_spec(name_or_path: &str) -> Result<ProxySpec> {
    if let Ok(spec) = ProxySpec::preset(name_or_path) {
        return Ok(spec);
    }
    let path = Path::new(name_or_path);
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ProxySpec::from_toml(&text)
}

/// Loads or generates the configured samples, attaches proxies, then
/// applies the protected attribute and task label.
pub fn load_dataset(cfg: &BenchmarkConfig) -> Result<Dataset> {
    let d = &cfg.data;
    let data_seed = derive_seed_parts(cfg.seed, &["data"]);
    let mut dataset = if let Some(path) = &d.csv {
        load_csv(path, &d.schema)?
    } else {
        let spec = match (&d.preset, &d.spec) {
            (Some(name), _) => BiasSpec::preset(name)?,
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                BiasSpec::from_toml(&text)?
            }
            (None, None) => return Err(Error::config("data: no source configured")),
        };
        spec.generate(d.n, data_seed)?
    };
    if let Some(p) = &d.proxies {
        dataset = attach_proxies(&dataset, &proxy_spec(p)?, derive_seed_parts(cfg.seed, &["proxies"]))?;
    }
    if cfg.protected_attribute != "group" {
        dataset = regroup(&dataset, &cfg.protected_attribute)?;
    }
    relabel(&dataset, &cfg.task)
}

/// Replaces the protected group with the values of an attribute. Levels
/// are ordered lexicographically.
pub fn regroup(dataset: &Dataset, attribute: &str) -> Result<Dataset> {
    let values = dataset
        .samples()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            s.attributes
                .get(attribute)
                .ok_or_else(|| Error::data(format!("sample {i} has no attribute {attribute:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let vocab: Vec<String> = values.iter().map(|v| v.to_string()).collect::<BTreeSet<_>>().into_iter().collect();
    let samples: Vec<Sample> = dataset
        .samples()
        .iter()
        .zip(&values)
        .map(|(s, v)| {
            let mut s = s.clone();
            s.group = vocab.iter().position(|l| l == *v).expect("level from vocab");
            s
        })
        .collect();
    Dataset::new(samples, vocab)
}

/// Sets the observed label to the gold label or a proxy label.
pub fn relabel(dataset: &Dataset, task: &str) -> Result<Dataset> {
    if task == "label" {
        return Ok(dataset.clone());
    }
    let samples = dataset
        .samples()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let y = if task == "gold_label" { s.gold_label } else { s.proxies.get(task).copied() };
            let y = y.ok_or_else(|| Error::data(format!("sample {i} has no {task:?} label")))?;
            Ok(Sample { label: y, ..s.clone() })
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(samples, dataset.group_vocab().to_vec())
}
