//! Benchmark runner: configuration, grid execution with model selection,
//! λ-sweeps, audits, and report files.
//!
//! All files are written atomically into the configured output directory.

mod audit;
mod common;
mod config;
mod generate;
mod io;
mod report;
mod run;
mod source;
mod sweep;

pub use audit::{audit, run_audit, AuditOutcome};
pub use config::{default_grid, point_key, AuditSection, BenchmarkConfig, DataSource, SplitSection, TrainSection};
pub use generate::generate;
pub use io::write_atomic;
pub use report::render_report;
pub use run::{
    execute, run, GapValue, GroupCurve, MethodReport, MinimaxRow, RunOutcome, RunReport, SelectionRow, BASELINE,
    BOOTSTRAP_POLICY, FILES, SCHEMA_VERSION, TRAIN_LOG,
};
pub use source::{load_dataset, regroup, relabel};
pub use sweep::{run_sweep, sweep, sweep_values, SweepReport, SweepRow, SWEEP_METRICS};
