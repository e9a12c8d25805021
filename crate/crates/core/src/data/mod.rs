//! Datasets, synthetic biased-data generation, CSV I/O, splitting, and
//! minibatch sampling.

mod bias;
mod csv_io;
mod dataset;
mod proxy;
mod sampler;
mod split;

pub use bias::{AttributeSpec, BiasSpec, FlipRates, GroupSpec};
pub use csv_io::{load_csv, parse_csv, to_csv_string, vocab_of, write_csv, CsvSchema};
pub use dataset::{Dataset, Fold, Sample};
pub use proxy::{attach_proxies, ProxyDef, ProxySpec};
pub use sampler::{balanced_batches, BalancedBatches, Batches, UniformBatches};
pub use split::{split, SplitPlan};
