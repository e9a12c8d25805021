use crate::data::{to_csv_string, Dataset};
use crate::error::Result;

use super::config::BenchmarkConfig;
use super::io::write_atomic;
use super::source::load_dataset;

/// Builds the configured dataset and writes it to `data.csv` in the output
/// directory.
pub fn generate(cfg: &BenchmarkConfig) -> Result<Dataset> {
    cfg.validate()?;
    let dataset = load_dataset(cfg)?;
    write_atomic(&cfg.output_dir().join("data.csv"), to_csv_string(&dataset)?.as_bytes())?;
    Ok(dataset)
}
