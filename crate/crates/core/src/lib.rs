//! Group-robust training and fairness benchmarking for binary risk scores.
//!
//! The crate trains small MLP scorers with ten group-fairness methods,
//! evaluates them per group with bootstrap confidence intervals, compares
//! them by their worst group, and audits biased labels against gold labels.
//!
//! - [`numerics`]: MLP, analytic gradients, Adam, gradient checks.
//! - [`data`]: synthetic cohorts with label bias, proxies, CSV, splits.
//! - [`trainers`]: training methods and model selection.
//! - [`metrics`]: per-group metrics, fairness gaps, bootstrap, minimax.
//! - [`audit`]: labeller PPV and proxy label evaluation.
//! - [`bench`]: configuration and the end-to-end protocol.
//!
//! ```
//! use groupfair::data::BiasSpec;
//! use groupfair::metrics::{auroc, ScoredSet, Subset};
//!
//! let data = BiasSpec::preset("two-group-gap")?.generate(500, 1)?;
//! let scores: Vec<f64> = data.samples().iter().map(|s| 1.0 / (1.0 + (-s.features[0]).exp())).collect();
//! let labels = data.samples().iter().map(|s| s.label).collect();
//! let groups = data.samples().iter().map(|s| s.group).collect();
//! let set = ScoredSet::new(scores, labels, groups, data.n_groups())?;
//! assert!((0.0..=1.0).contains(&auroc(&set, Subset::All)?));
//! # Ok::<(), groupfair::Error>(())
//! ```

pub mod audit;
pub mod bench;
pub mod data;
pub mod error;
pub mod metrics;
pub mod numerics;
pub mod rng;
pub mod trainers;

pub use error::{Error, Result};

#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/data.md")]
    pub mod data {}
    #[doc = include_str!("../../../book/src/training.md")]
    pub mod training {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    pub mod metrics {}
    #[doc = include_str!("../../../book/src/minimax.md")]
    pub mod minimax {}
    #[doc = include_str!("../../../book/src/audit.md")]
    pub mod audit {}
    #[doc = include_str!("../../../book/src/protocol.md")]
    pub mod protocol {}
}
