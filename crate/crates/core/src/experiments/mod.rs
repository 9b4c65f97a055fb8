//! The four ablation studies over data difficulty, accuracy, diversity, and
//! quantity, plus their analysis artifacts.
//!
//! A study is a pure function of its [`StudySpec`]: the pool and eval
//! corpora, every condition's training set, each replicate's model init and
//! batch order all derive from the spec's seed through named streams.
//! `results.csv` is therefore byte-identical across reruns.

mod result;
mod run;
mod spec;

pub use result::{
    emit_report, read_results_csv, spearman, summarize, write_results_csv, write_timings_csv,
    AblationResult, StudySummary,
};
pub use run::run_study;
pub use spec::{StudyKind, StudySpec};
