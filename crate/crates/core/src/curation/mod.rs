//! Dataset curation: the sampling strategies under study.
//!
//! Every operation here draws from a pool by sample id, never by record
//! position, and every random choice comes off a named stream of the plan
//! seed. Rebuilding the same plan from the same pool yields the same derived
//! set, byte for byte.

mod apportion;
mod bins;
mod kmeans;
mod noise;
mod plan;
mod subsets;

pub use apportion::{capped_apportion, largest_remainder};
pub use bins::{bin_by_confidence, sample_by_ratios, BinRatios, BinSpec, BinnedSamples};
pub use kmeans::{
    adjusted_rand_index, coverage_sample, fit_kmeans, load_cluster_model, save_cluster_model,
    ClusterModel,
};
pub use noise::{inject_noise, NoiseSpec};
pub use plan::{apply_plan, apply_plan_to, plan_echo, CoveragePlan, CurationPlan};
pub use subsets::quantity_subsets;
