//! Declarative curation plans: one document describing how a derived
//! training set is drawn from a scored pool.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::corpus::{read_manifest, CorpusManifest, Split};
use crate::error::{Error, Result};
use crate::rng::{shuffle, stream};

use super::bins::{bin_by_confidence, sample_by_ratios, BinRatios, BinSpec};
use super::kmeans::{coverage_sample, load_cluster_model};
use super::noise::NoiseSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveragePlan {
    /// Directory holding a saved cluster model over the source pool.
    pub model_dir: PathBuf,
    /// How many of the model's clusters the draw may touch.
    pub clusters_used: usize,
}

/// Everything needed to rebuild a derived training set from its source pool.
/// The whole plan is echoed into the derived manifest's header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationPlan {
    /// Manifest file the plan draws from.
    pub source: PathBuf,
    /// Exact size of the derived training set before noise injection.
    pub target_size: usize,
    /// Difficulty axis: custom confidence bin boundaries; requires `ratios`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundaries: Option<BinSpec>,
    /// Difficulty axis: per-bin target fractions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratios: Option<BinRatios>,
    /// Diversity axis: spread the draw across embedding clusters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<CoveragePlan>,
    /// Accuracy axis: controlled label corruption after selection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
    /// Style oversampling multipliers, recorded for the trainer to honor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category_weights: Option<BTreeMap<u32, f64>>,
    #[serde(default)]
    pub seed: u64,
}

impl CurationPlan {
    /// Minimal plan: seeded uniform subsample of `target_size`.
    pub fn subsample(source: impl Into<PathBuf>, target_size: usize, seed: u64) -> Self {
        CurationPlan {
            source: source.into(),
            target_size,
            boundaries: None,
            ratios: None,
            coverage: None,
            noise: None,
            category_weights: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_size == 0 {
            return Err(Error::data("target_size must be >= 1"));
        }
        if self.boundaries.is_some() && self.ratios.is_none() {
            return Err(Error::data("bin boundaries given without bin ratios"));
        }
        if let Some(ratios) = &self.ratios {
            ratios.validate(&self.boundaries.clone().unwrap_or_default())?;
        }
        if let Some(noise) = &self.noise {
            noise.validate()?;
        }
        if let Some(cov) = &self.coverage {
            if cov.clusters_used == 0 {
                return Err(Error::data("clusters_used must be >= 1"));
            }
        }
        if let Some(weights) = &self.category_weights {
            if weights.is_empty() {
                return Err(Error::data("category_weights present but empty"));
            }
            for (style, &w) in weights {
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::data(format!(
                        "category weight for style {style} must be finite and >= 0, got {w}"
                    )));
                }
            }
            if weights.values().all(|&w| w == 0.0) {
                return Err(Error::data("category_weights are all zero"));
            }
        }
        Ok(())
    }
}

fn in_stage(name: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Data(m) => Error::Data(format!("{name} stage: {m}")),
        Error::Usage(m) => Error::Usage(format!("{name} stage: {m}")),
        Error::Numerical(m) => Error::Numerical(format!("{name} stage: {m}")),
        other => other,
    }
}

/// Loads the plan's source manifest and applies the plan to it.
pub fn apply_plan(plan: &CurationPlan) -> Result<CorpusManifest> {
    plan.validate()?;
    let manifest = read_manifest(&plan.source)?;
    apply_plan_to(&manifest, plan)
}

/// Applies a plan to an already-loaded source manifest.
///
/// Stages compose in a fixed order: difficulty sampling, then coverage
/// sampling over the difficulty-sampled pool, then noise injection. When
/// both difficulty and coverage are requested, difficulty keeps an
/// intermediate pool of min(pool, 2 x target_size) so coverage has room to
/// choose. Only train-split records are eligible; the derived manifest
/// carries the plan in its header.
pub fn apply_plan_to(manifest: &CorpusManifest, plan: &CurationPlan) -> Result<CorpusManifest> {
    plan.validate()?;
    let train_ids: BTreeSet<String> = manifest
        .split_records(Split::Train)
        .map(|r| r.id.clone())
        .collect();
    if train_ids.is_empty() {
        return Err(Error::data("source manifest has no train records"));
    }
    let pool = manifest.subset(&train_ids);
    let n = plan.target_size;

    let selected: Vec<String> = match (&plan.ratios, &plan.coverage) {
        (Some(ratios), coverage) => {
            let spec = plan.boundaries.clone().unwrap_or_default();
            let binned = bin_by_confidence(&pool, &spec).map_err(in_stage("difficulty"))?;
            let take = if coverage.is_some() {
                (2 * n).min(pool.records.len())
            } else {
                n
            };
            let ids = sample_by_ratios(&binned, ratios, take, plan.seed)
                .map_err(in_stage("difficulty"))?;
            match coverage {
                None => ids,
                Some(cov) => {
                    let keep: BTreeSet<String> = ids.into_iter().collect();
                    coverage_over(&pool.subset(&keep), cov, n, plan.seed)?
                }
            }
        }
        (None, Some(cov)) => coverage_over(&pool, cov, n, plan.seed)?,
        (None, None) => {
            if n > pool.records.len() {
                return Err(Error::data(format!(
                    "target_size {n} exceeds pool of {}",
                    pool.records.len()
                )));
            }
            let mut ids: Vec<String> = train_ids.iter().cloned().collect();
            shuffle(&mut ids, &mut stream(plan.seed, "subsample", &[]));
            ids.truncate(n);
            ids
        }
    };

    let keep: BTreeSet<String> = selected.into_iter().collect();
    let mut derived = pool.subset(&keep);
    if let Some(noise) = &plan.noise {
        derived = super::inject_noise(&derived, noise).map_err(in_stage("noise"))?;
    }
    derived.header.plan =
        Some(serde_json::to_value(plan).expect("plan serializes to JSON"));
    Ok(derived)
}

/// Coverage draw restricted to the records of `pool`: the saved cluster
/// model must assign every pool record, and only those assignments count.
fn coverage_over(
    pool: &CorpusManifest,
    cov: &CoveragePlan,
    n: usize,
    seed: u64,
) -> Result<Vec<String>> {
    let model = load_cluster_model(&cov.model_dir).map_err(in_stage("coverage"))?;
    if cov.clusters_used > model.k {
        return Err(Error::data(format!(
            "coverage stage: clusters_used {} exceeds the model's k = {}",
            cov.clusters_used, model.k
        )));
    }
    let mut restricted = model.clone();
    restricted.assignments.clear();
    for rec in &pool.records {
        let &cluster = model.assignments.get(&rec.id).ok_or_else(|| {
            Error::data(format!(
                "coverage stage: record {} has no cluster assignment",
                rec.id
            ))
        })?;
        restricted.assignments.insert(rec.id.clone(), cluster);
    }
    coverage_sample(&restricted, cov.clusters_used, n, seed).map_err(in_stage("coverage"))
}

/// Reads the plan a derived manifest was built with, if any.
pub fn plan_echo(manifest: &CorpusManifest) -> Result<Option<CurationPlan>> {
    match &manifest.header.plan {
        None => Ok(None),
        Some(value) => serde_json::from_value(value.clone())
            .map(Some)
            .map_err(|e| Error::data(format!("manifest plan echo does not parse: {e}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ManifestHeader, SampleRecord, Vocabulary};
    use crate::curation::{fit_kmeans, save_cluster_model};
    use crate::recognizer::Embeddings;

    fn pool_manifest(n: usize) -> CorpusManifest {
        let records = (0..n)
            .map(|i| SampleRecord {
                id: format!("s{i:04}"),
                image_path: format!("img/s{i:04}.pgm"),
                label: "abc".into(),
                style_id: (i % 3) as u32,
                noise_sigma: 0.0,
                corrupted: false,
                split: Split::Train,
                confidence: Some((i as f64 + 0.5) / n as f64),
            })
            .collect();
        CorpusManifest::new(
            ManifestHeader::new(Vocabulary::lowercase_latin(), 16, 8, 0),
            records,
            PathBuf::from("/nonexistent"),
        )
    }

    #[test]
    fn bare_plan_subsamples_exactly() {
        let pool = pool_manifest(100);
        let plan = CurationPlan::subsample("unused.jsonl", 40, 9);
        let derived = apply_plan_to(&pool, &plan).unwrap();
        assert_eq!(derived.records.len(), 40);
        let again = apply_plan_to(&pool, &plan).unwrap();
        assert_eq!(
            derived.records.iter().map(|r| &r.id).collect::<Vec<_>>(),
            again.records.iter().map(|r| &r.id).collect::<Vec<_>>()
        );
        let other = apply_plan_to(
            &pool,
            &CurationPlan {
                seed: 10,
                ..plan.clone()
            },
        )
        .unwrap();
        assert_ne!(
            derived.records.iter().map(|r| &r.id).collect::<Vec<_>>(),
            other.records.iter().map(|r| &r.id).collect::<Vec<_>>()
        );
    }

    #[test]
    fn plan_echo_round_trips() {
        let pool = pool_manifest(50);
        let mut plan = CurationPlan::subsample("pool/manifest.jsonl", 20, 3);
        plan.noise = Some(NoiseSpec::new(0.1, 5));
        plan.category_weights = Some(BTreeMap::from([(0, 1.0), (1, 2.0), (2, 1.0)]));
        let derived = apply_plan_to(&pool, &plan).unwrap();
        let echoed = plan_echo(&derived).unwrap().expect("plan present");
        assert_eq!(echoed, plan);
        assert_eq!(plan_echo(&pool).unwrap(), None);
    }

    #[test]
    fn ratios_and_noise_compose() {
        let pool = pool_manifest(1000);
        let mut plan = CurationPlan::subsample("unused.jsonl", 200, 4);
        plan.ratios = Some(BinRatios::default());
        plan.noise = Some(NoiseSpec::new(0.1, 6));
        let derived = apply_plan_to(&pool, &plan).unwrap();
        assert_eq!(derived.records.len(), 200);
        let corrupted = derived.records.iter().filter(|r| r.corrupted).count();
        assert_eq!(corrupted, 20);
        // Uniform confidences put 800/100/50/20/30 in the five bins. The top
        // three bins saturate (50, 20, 30), and the shortfall flows to the
        // two low bins in ratio 0.032 : 0.104.
        let spec = BinSpec::default();
        let mut counts = vec![0usize; 5];
        for r in &derived.records {
            counts[spec.bin_of(r.confidence.unwrap())] += 1;
        }
        assert_eq!(counts, vec![24, 76, 50, 20, 30]);
    }

    #[test]
    fn boundaries_without_ratios_is_rejected() {
        let pool = pool_manifest(10);
        let mut plan = CurationPlan::subsample("unused.jsonl", 5, 0);
        plan.boundaries = Some(BinSpec::default());
        let err = apply_plan_to(&pool, &plan).unwrap_err();
        assert!(err.to_string().contains("boundaries"));
    }

    #[test]
    fn coverage_composes_with_difficulty() {
        let tmp = tempfile::tempdir().unwrap();
        let pool = pool_manifest(200);
        // Two well-separated 1-d blobs, ids matching the pool.
        let ids: Vec<String> = pool.records.iter().map(|r| r.id.clone()).collect();
        let data: Vec<f32> = (0..200).map(|i| if i % 2 == 0 { 0.0 } else { 50.0 }).collect();
        let emb = Embeddings { dim: 1, data };
        let model = fit_kmeans(&emb, &ids, 2, 50, 1e-9, 0).unwrap();
        save_cluster_model(tmp.path(), &model).unwrap();

        let mut plan = CurationPlan::subsample("unused.jsonl", 50, 8);
        plan.ratios = Some(BinRatios::default());
        plan.coverage = Some(CoveragePlan {
            model_dir: tmp.path().to_path_buf(),
            clusters_used: 2,
        });
        let derived = apply_plan_to(&pool, &plan).unwrap();
        assert_eq!(derived.records.len(), 50);
        let per_cluster: Vec<usize> = (0..2)
            .map(|c| {
                derived
                    .records
                    .iter()
                    .filter(|r| model.assignments[&r.id] == c)
                    .count()
            })
            .collect();
        assert_eq!(per_cluster.iter().sum::<usize>(), 50);
        assert!(per_cluster.iter().all(|&c| c >= 20), "{per_cluster:?}");
    }

    #[test]
    fn coverage_errors_name_their_stage() {
        let pool = pool_manifest(20);
        let mut plan = CurationPlan::subsample("unused.jsonl", 5, 0);
        plan.coverage = Some(CoveragePlan {
            model_dir: PathBuf::from("/nonexistent-model"),
            clusters_used: 1,
        });
        assert!(apply_plan_to(&pool, &plan).is_err());

        let tmp = tempfile::tempdir().unwrap();
        let ids: Vec<String> = (0..10).map(|i| format!("other{i}")).collect();
        let emb = Embeddings {
            dim: 1,
            data: (0..10).map(|i| i as f32).collect(),
        };
        let model = fit_kmeans(&emb, &ids, 2, 10, 1e-9, 0).unwrap();
        save_cluster_model(tmp.path(), &model).unwrap();
        plan.coverage = Some(CoveragePlan {
            model_dir: tmp.path().to_path_buf(),
            clusters_used: 2,
        });
        let err = apply_plan_to(&pool, &plan).unwrap_err().to_string();
        assert!(err.contains("coverage stage"), "{err}");
        assert!(err.contains("no cluster assignment"), "{err}");
    }

    #[test]
    fn oversized_targets_are_rejected() {
        let pool = pool_manifest(10);
        let plan = CurationPlan::subsample("unused.jsonl", 11, 0);
        assert!(apply_plan_to(&pool, &plan).is_err());
        assert!(apply_plan_to(&pool, &CurationPlan::subsample("u", 0, 0)).is_err());
    }

    #[test]
    fn plan_loads_its_source_from_disk() {
        let tmp = tempfile::tempdir().unwrap();
        let pool = pool_manifest(30);
        let path = tmp.path().join("manifest.jsonl");
        crate::corpus::write_manifest(&pool, &path).unwrap();
        let plan = CurationPlan::subsample(&path, 12, 1);
        let derived = apply_plan(&plan).unwrap();
        assert_eq!(derived.records.len(), 12);
    }
}
