//! Per-group evaluation: ranking, calibration and threshold metrics,
//! fairness gaps, bootstrap intervals and the minimax comparison.

mod bootstrap;
mod calibration;
mod ranking;
mod report;
mod scored;
mod threshold;

pub use bootstrap::{bootstrap, calibration_curve_ci, paired_delta, percentile, BootstrapConfig, Ensemble, Estimate};
pub use calibration::{bin_of, calibration_curve, ece, CalibrationCurve};
pub use ranking::{auroc, recall_at_specificity, roc_curve, RocCurve, RocPoint};
pub use report::{
    minimax_bootstrap, minimax_compare, GroupReport, Metric, MetricParams, MetricValue, Minimax, Orientation,
    ALL_GROUPS, WORST_GROUP,
};
pub use scored::{ScoredSet, Subset};
pub use threshold::{confusion_at, fairness_gaps, mean_score_cell, Confusion, GapTable};
