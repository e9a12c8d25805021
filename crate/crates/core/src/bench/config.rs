//! Benchmark configuration file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{BiasSpec, CsvSchema, ProxySpec, SplitPlan};
use crate::error::{Error, Result};
use crate::metrics::{BootstrapConfig, Metric, MetricParams};
use crate::rng::derive_seed_parts;
use crate::trainers::{Method, TrainConfig};

/// Where the samples come from. Exactly one of `preset`, `spec` and `csv`
/// must be set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSource {
    /// Name of a built-in bias spec.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Path to a bias spec TOML file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec: Option<PathBuf>,
    /// Path to a CSV file read with `schema`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    /// Samples to generate from a preset or spec.
    pub n: usize,
    pub schema: CsvSchema,
    /// Proxy spec preset name or TOML path; attaches proxy labels.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub proxies: Option<String>,
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource { preset: None, spec: None, csv: None, n: 6000, schema: CsvSchema::default(), proxies: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub test_fraction: f64,
    pub n_folds: usize,
}

impl Default for SplitSection {
    fn default() -> Self {
        let p = SplitPlan::default();
        SplitSection { test_fraction: p.test_fraction, n_folds: p.n_folds }
    }
}

/// Training settings shared by every method and grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub lr: f64,
    pub batch_size: usize,
    pub eval_every: usize,
    pub patience: usize,
    pub max_steps: usize,
    pub hidden: Vec<usize>,
    pub adversary_hidden: usize,
    /// FairALM quadratic penalty coefficient.
    pub rho: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            lr: t.lr,
            batch_size: t.batch_size,
            eval_every: t.eval_every,
            patience: t.patience,
            max_steps: t.max_steps,
            hidden: t.hidden,
            adversary_hidden: t.adversary_hidden,
            rho: t.rho,
        }
    }
}

impl TrainSection {
    pub fn train_config(&self, method: Method) -> TrainConfig {
        TrainConfig {
            method,
            lr: self.lr,
            batch_size: self.batch_size,
            eval_every: self.eval_every,
            patience: self.patience,
            max_steps: self.max_steps,
            hidden: self.hidden.clone(),
            adversary_hidden: self.adversary_hidden,
            rho: self.rho,
            ..TrainConfig::default()
        }
    }
}

/// Settings for the `audit` verb.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSection {
    pub attribute_a: String,
    /// Second attribute; without one the table has a single `ALL` column.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attribute_b: Option<String>,
    pub iters: usize,
    /// Proxy labels to evaluate a trained model against.
    pub proxies: Vec<String>,
    /// Method trained for the proxy evaluation.
    pub method: Method,
}

impl Default for AuditSection {
    fn default() -> Self {
        AuditSection { attribute_a: "group".into(), attribute_b: None, iters: 500, proxies: Vec::new(), method: Method::Erm }
    }
}

/// A benchmark run: data, split, methods with their grids, and evaluation
/// settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Worker threads; unset means one per core.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub tau: f64,
    pub bootstrap_iters: usize,
    pub ece_bins: usize,
    pub recall_specificity: f64,
    pub metrics: Vec<Metric>,
    pub methods: Vec<Method>,
    /// `label`, `gold_label`, or the name of a proxy label.
    pub task: String,
    /// `group`, or the name of a sample attribute to group by instead.
    pub protected_attribute: String,
    pub data: DataSource,
    pub split: SplitSection,
    pub train: TrainSection,
    /// Per-method hyperparameter lists, keyed by method name then
    /// hyperparameter name. Methods without an entry use [`default_grid`].
    pub grid: BTreeMap<String, BTreeMap<String, Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit: Option<AuditSection>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            seed: 0,
            output_dir: None,
            workers: None,
            tau: 0.5,
            bootstrap_iters: 250,
            ece_bins: 10,
            recall_specificity: 0.8,
            metrics: Metric::ALL.to_vec(),
            methods: vec![Method::BalancedErm],
            task: "label".into(),
            protected_attribute: "group".into(),
            data: DataSource::default(),
            split: SplitSection::default(),
            train: TrainSection::default(),
            grid: BTreeMap::new(),
            audit: None,
        }
    }
}

/// Search grid used when a config gives none for a method.
pub fn default_grid(method: Method) -> BTreeMap<String, Vec<f64>> {
    let values: &[f64] = match method {
        Method::Adversarial => &[0.01, 0.05, 0.1, 1.0, 2.0, 5.0, 20.0, 30.0, 50.0, 100.0],
        Method::MmdMatch | Method::MeanMatch => {
            &[0.1, 0.5, 0.75, 1.0, 2.0, 3.0, 4.0, 5.0, 10.0, 20.0, 30.0, 50.0, 100.0]
        }
        Method::GroupDro => &[0.01, 0.1, 1.0],
        Method::FairAlm => &[0.1, 0.01, 0.001],
        Method::Jtt => &[2.0, 3.0, 5.0, 10.0, 30.0, 50.0],
        _ => &[],
    };
    method
        .axis()
        .filter(|_| !values.is_empty())
        .map(|axis| BTreeMap::from([(axis.to_owned(), values.to_vec())]))
        .unwrap_or_default()
}

/// Renders hyperparameters as `k=v;k=v`.
pub fn point_key(hyperparameters: &BTreeMap<String, f64>) -> String {
    hyperparameters.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
}

/// A validation failure tied to a dotted config key.
struct Issue {
    key: String,
    msg: String,
}

fn issue(key: impl Into<String>, msg: impl Into<String>) -> Issue {
    Issue { key: key.into(), msg: msg.into() }
}

impl BenchmarkConfig {
    /// Parses and validates a TOML config. Relative paths are resolved
    /// against `base_dir`. Validation errors name the offending line.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: BenchmarkConfig = toml::from_str(text)?;
        cfg.resolve_paths(base_dir);
        cfg.check().map_err(|i| match locate(text, &i.key) {
            Some(line) => Error::config(format!("line {line}: {}: {}", i.key, i.msg)),
            None => Error::config(format!("{}: {}", i.key, i.msg)),
        })?;
        Ok(cfg)
    }

    /// Reads a TOML config, or the config echoed in a run manifest when the
    /// path ends in `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if path.extension().is_some_and(|e| e == "json") {
            let manifest: serde_json::Value = serde_json::from_str(&text)?;
            let echo = manifest
                .get("config")
                .ok_or_else(|| Error::config(format!("{}: manifest has no config", path.display())))?;
            let mut cfg: BenchmarkConfig = serde_json::from_value(echo.clone())?;
            cfg.resolve_paths(base);
            cfg.validate()?;
            return Ok(cfg);
        }
        Self::from_toml_str(&text, base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        for p in [&mut self.data.spec, &mut self.data.csv, &mut self.output_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(p) = &mut self.data.proxies {
            if ProxySpec::preset(p).is_err() && Path::new(p).is_relative() {
                *p = base.join(&*p).to_string_lossy().into_owned();
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|i| Error::config(format!("{}: {}", i.key, i.msg)))
    }

    fn check(&self) -> std::result::Result<(), Issue> {
        if self.methods.is_empty() {
            return Err(issue("methods", "the method list is empty"));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(issue("methods", format!("{m} is listed twice")));
            }
        }
        if self.metrics.is_empty() {
            return Err(issue("metrics", "the metric list is empty"));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(issue("tau", format!("must lie in (0, 1), got {}", self.tau)));
        }
        if self.bootstrap_iters == 0 {
            return Err(issue("bootstrap_iters", "must be positive"));
        }
        if self.ece_bins == 0 {
            return Err(issue("ece_bins", "must be positive"));
        }
        if !(self.recall_specificity > 0.0 && self.recall_specificity < 1.0) {
            return Err(issue("recall_specificity", "must lie in (0, 1)"));
        }
        if self.workers == Some(0) {
            return Err(issue("workers", "must be positive"));
        }
        let d = &self.data;
        let sources = [d.preset.is_some(), d.spec.is_some(), d.csv.is_some()].iter().filter(|&&b| b).count();
        if sources != 1 {
            return Err(issue("data", "set exactly one of preset, spec and csv"));
        }
        if let Some(p) = &d.preset {
            BiasSpec::preset(p).map_err(|e| issue("data.preset", e.to_string()))?;
        }
        if d.csv.is_none() && d.n == 0 {
            return Err(issue("data.n", "must be positive"));
        }
        self.split_plan().validate().map_err(|e| issue("split", e.to_string()))?;
        for name in self.grid.keys() {
            let m: Method = name.parse().map_err(|e: Error| issue(format!("grid.{name}"), e.to_string()))?;
            if !self.methods.contains(&m) {
                log::warn!("grid for {m} is ignored: the method is not listed");
            }
        }
        for &m in &self.methods {
            self.grid_points(m).map_err(|e| issue(format!("grid.{m}"), e.to_string()))?;
        }
        if let Some(a) = &self.audit {
            if a.iters == 0 {
                return Err(issue("audit.iters", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn split_plan(&self) -> SplitPlan {
        SplitPlan {
            test_fraction: self.split.test_fraction,
            n_folds: self.split.n_folds,
            seed: derive_seed_parts(self.seed, &["split"]),
        }
    }

    pub fn metric_params(&self) -> MetricParams {
        MetricParams { tau: self.tau, ece_bins: self.ece_bins, specificity: self.recall_specificity }
    }

    pub fn bootstrap_config(&self) -> BootstrapConfig {
        BootstrapConfig { iters: self.bootstrap_iters, seed: derive_seed_parts(self.seed, &["bootstrap"]), level: 0.95 }
    }

    /// The grid searched for `method`.
    pub fn grid_for(&self, method: Method) -> BTreeMap<String, Vec<f64>> {
        let configured = self.grid.iter().find(|(k, _)| k.parse::<Method>().ok() == Some(method));
        configured.map(|(_, g)| g.clone()).unwrap_or_else(|| default_grid(method))
    }

    /// Every training configuration for `method`: the Cartesian product of
    /// its grid lists, each with a seed hashed from the method and point.
    pub fn grid_points(&self, method: Method) -> Result<Vec<TrainConfig>> {
        let grid = self.grid_for(method);
        let mut points = vec![self.train.train_config(method)];
        for (name, values) in &grid {
            if !method.relevant().contains(&name.as_str()) {
                return Err(Error::config(format!("{method} does not use hyperparameter {name:?}")));
            }
            if values.is_empty() {
                return Err(Error::config(format!("grid list {name:?} is empty")));
            }
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.set(name, v).map(|_| q)
                    })
                })
                .collect::<Result<Vec<_>>>()?;
        }
        for p in &mut points {
            p.validate()?;
            p.seed = derive_seed_parts(self.seed, &["run", method.name(), &point_key(&p.hyperparameters())]);
        }
        Ok(points)
    }

    /// Methods to run, with the Balanced ERM baseline added if missing.
    pub fn methods_with_baseline(&self) -> Vec<Method> {
        let mut m = self.methods.clone();
        if !m.contains(&Method::BalancedErm) {
            m.push(Method::BalancedErm);
        }
        m
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// 1-based line of a dotted key: a `[table]` header, or `name =` inside the
/// parent table.
fn locate(text: &str, key: &str) -> Option<usize> {
    let lines: Vec<&str> = text.lines().collect();
    let header = |t: &str| lines.iter().position(|l| l.trim() == format!("[{t}]"));
    let assigns = |l: &str, name: &str| {
        let l = l.trim_start();
        l.strip_prefix(name).is_some_and(|r| r.trim_start().starts_with('='))
            || l.strip_prefix(&format!("\"{name}\"")).is_some_and(|r| r.trim_start().starts_with('='))
    };
    if let Some(i) = header(key) {
        return Some(i + 1);
    }
    let (table, name) = key.rsplit_once('.').unwrap_or(("", key));
    let start = if table.is_empty() { 0 } else { header(table)? + 1 };
    lines[start..]
        .iter()
        .take_while(|l| table.is_empty() || !l.trim_start().starts_with('[') || l.trim_start().starts_with("[["))
        .position(|l| assigns(l, name))
        .map(|i| start + i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<BenchmarkConfig> {
        BenchmarkConfig::from_toml_str(text, Path::new("/tmp"))
    }

    #[test]
    fn default_grid_cardinalities() {
        let cfg = parse("methods = [\"JTT\", \"MMDMatch\", \"ERM\"]\n[data]\npreset = \"two-group-gap\"\n").unwrap();
        assert_eq!(cfg.grid_points(Method::Jtt).unwrap().len(), 6);
        assert_eq!(cfg.grid_points(Method::MmdMatch).unwrap().len(), 13);
        assert_eq!(cfg.grid_points(Method::Erm).unwrap().len(), 1);
        let seeds: std::collections::BTreeSet<u64> = cfg.grid_points(Method::Jtt).unwrap().iter().map(|p| p.seed).collect();
        assert_eq!(seeds.len(), 6);
    }

    #[test]
    fn errors_name_the_line() {
        let e = parse("seed = 1\nmethods = []\n[data]\npreset = \"two-group-gap\"\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        let e = parse("methods = [\"ERM\"]\n[data]\npreset = \"nope\"\n").unwrap_err();
        assert!(e.to_string().contains("line 3"), "{e}");
        let e = parse("methods = [\"JTT\"]\n[data]\npreset = \"two-group-gap\"\n[grid.JTT]\nlambda_up = []\n").unwrap_err();
        assert!(e.to_string().contains("line 4"), "{e}");
        assert!(parse("methods = [\"ERM\"]\nbogus = 1\n").unwrap_err().to_string().contains("line 2"));
    }

    #[test]
    fn grid_keys_must_be_relevant() {
        let e = parse("methods = [\"ERM\"]\n[data]\npreset = \"two-group-gap\"\n[grid.ERM]\nlambda = [1.0]\n").unwrap_err();
        assert!(e.to_string().contains("lambda"));
    }

    #[test]
    fn baseline_is_added() {
        let cfg = parse("methods = [\"ERM\"]\n[data]\npreset = \"two-group-gap\"\n").unwrap();
        assert_eq!(cfg.methods_with_baseline(), vec![Method::Erm, Method::BalancedErm]);
    }
}
