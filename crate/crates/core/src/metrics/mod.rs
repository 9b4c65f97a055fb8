//! Evaluation metrics: edit distance, exact match, and weighted rollups.
//!
//! The recognizer's quality claims all reduce to these few functions, so the
//! module carries its own oracle (`edit_distance_exhaustive`) against which
//! the production DP is checked over every short pair.

mod edit;
mod report;

pub use edit::{edit_distance, edit_distance_exhaustive, normalized_edit_distance};
pub use report::{
    build_report, exact_match, kahan_mean, one_minus_edit_dist, read_pairs_csv,
    weighted_accuracy, write_category_csv, write_pairs_csv, write_report, CategoryMetrics,
    EvalPair, MetricReport,
};
