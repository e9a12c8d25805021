use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ERM")]
    Erm,
    #[serde(rename = "BalancedERM")]
    BalancedErm,
    #[serde(rename = "StratifiedERM")]
    StratifiedErm,
    Adversarial,
    #[serde(rename = "MMDMatch")]
    MmdMatch,
    MeanMatch,
    #[serde(rename = "FairALM")]
    FairAlm,
    #[serde(rename = "GroupDRO")]
    GroupDro,
    #[serde(rename = "ARL")]
    Arl,
    #[serde(rename = "JTT")]
    Jtt,
}

/// How minibatches are drawn for a method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Uniform,
    Balanced,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::Erm,
        Method::BalancedErm,
        Method::StratifiedErm,
        Method::Adversarial,
        Method::MmdMatch,
        Method::MeanMatch,
        Method::FairAlm,
        Method::GroupDro,
        Method::Arl,
        Method::Jtt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Erm => "ERM",
            Method::BalancedErm => "BalancedERM",
            Method::StratifiedErm => "StratifiedERM",
            Method::Adversarial => "Adversarial",
            Method::MmdMatch => "MMDMatch",
            Method::MeanMatch => "MeanMatch",
            Method::FairAlm => "FairALM",
            Method::GroupDro => "GroupDRO",
            Method::Arl => "ARL",
            Method::Jtt => "JTT",
        }
    }

    pub fn sampler(self) -> SamplerKind {
        match self {
            Method::Erm | Method::Jtt | Method::Arl | Method::StratifiedErm => SamplerKind::Uniform,
            _ => SamplerKind::Balanced,
        }
    }

    /// The hyperparameter searched over for this method, if any.
    pub fn axis(self) -> Option<&'static str> {
        match self {
            Method::Adversarial => Some("alpha"),
            Method::MmdMatch | Method::MeanMatch => Some("lambda"),
            Method::FairAlm | Method::GroupDro => Some("eta"),
            Method::Jtt => Some("lambda_up"),
            _ => None,
        }
    }

    /// The hyperparameters this method reads.
    pub fn relevant(self) -> &'static [&'static str] {
        match self {
            Method::Adversarial => &["alpha"],
            Method::MmdMatch | Method::MeanMatch => &["lambda"],
            Method::FairAlm => &["eta", "rho"],
            Method::GroupDro => &["eta"],
            Method::Jtt => &["lambda_up"],
            _ => &[],
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let known: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::config(format!("unknown method {s:?}; expected one of {}", known.join(", ")))
            })
    }
}

/// Method selector plus every hyperparameter. Parameters a method does not
/// use are ignored but kept so runs are fully described.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub method: Method,
    /// Penalty weight for MMDMatch and MeanMatch.
    pub lambda: f64,
    /// Adversary weight for Adversarial.
    pub alpha: f64,
    /// Step size of the GroupDRO weights or the FairALM multipliers.
    pub eta: f64,
    /// JTT upweight for stage-1 errors.
    pub lambda_up: f64,
    /// FairALM quadratic penalty coefficient.
    pub rho: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub eval_every: usize,
    pub patience: usize,
    pub max_steps: usize,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub adversary_hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            method: Method::BalancedErm,
            lambda: 0.0,
            alpha: 0.0,
            eta: 0.01,
            lambda_up: 2.0,
            rho: 1.0,
            lr: 1e-4,
            batch_size: 64,
            eval_every: 200,
            patience: 5,
            max_steps: 20_000,
            seed: 0,
            hidden: vec![16],
            adversary_hidden: 8,
        }
    }
}

impl TrainConfig {
    pub fn new(method: Method) -> Self {
        TrainConfig { method, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::config(format!("{}: {what}", self.method)));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if self.batch_size == 0 || self.eval_every == 0 || self.patience == 0 || self.max_steps == 0 {
            return bad("batch_size, eval_every, patience and max_steps must be positive");
        }
        if self.hidden.iter().any(|&h| h == 0) || self.adversary_hidden == 0 {
            return bad("hidden widths must be positive");
        }
        for (name, v) in [("lambda", self.lambda), ("alpha", self.alpha), ("rho", self.rho)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if matches!(self.method, Method::GroupDro | Method::FairAlm) && !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(&format!("eta must be positive, got {}", self.eta));
        }
        if self.method == Method::Jtt && !(self.lambda_up >= 1.0 && self.lambda_up.is_finite()) {
            return bad(&format!("lambda_up must be >= 1, got {}", self.lambda_up));
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "lambda" => Some(self.lambda),
            "alpha" => Some(self.alpha),
            "eta" => Some(self.eta),
            "lambda_up" => Some(self.lambda_up),
            "rho" => Some(self.rho),
            "lr" => Some(self.lr),
            _ => None,
        }
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        match name {
            "lambda" => self.lambda = value,
            "alpha" => self.alpha = value,
            "eta" => self.eta = value,
            "lambda_up" => self.lambda_up = value,
            "rho" => self.rho = value,
            "lr" => self.lr = value,
            other => return Err(Error::config(format!("unknown hyperparameter {other:?}"))),
        }
        Ok(())
    }

    /// Values of the hyperparameters the method reads.
    pub fn hyperparameters(&self) -> BTreeMap<String, f64> {
        self.method
            .relevant()
            .iter()
            .map(|&k| (k.to_owned(), self.get(k).expect("known name")))
            .collect()
    }

    /// Weight of the method's searched hyperparameter, used to break ties in
    /// model selection; zero for methods without one.
    pub fn penalty_weight(&self) -> f64 {
        self.method.axis().and_then(|a| self.get(a)).unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_validate() {
        assert_eq!("mmdmatch".parse::<Method>().unwrap(), Method::MmdMatch);
        assert!("SVM".parse::<Method>().is_err());
        assert!(TrainConfig::default().validate().is_ok());
        let mut c = TrainConfig::new(Method::Jtt);
        c.lambda_up = 0.5;
        assert!(c.validate().is_err());
        c = TrainConfig::new(Method::GroupDro);
        c.eta = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn toml_uses_display_method_names() {
        let c: TrainConfig = toml::from_str("method = \"FairALM\"\neta = 0.1").unwrap();
        assert_eq!(c.method, Method::FairAlm);
        assert_eq!(c.hyperparameters().len(), 2);
        assert!(toml::from_str::<TrainConfig>("methd = \"ERM\"").is_err());
    }
}
