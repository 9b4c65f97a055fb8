//! End-to-end study execution: pool -> conditions -> retrain -> evaluate.
//!
//! Condition isolation contract: within one study, every condition of a
//! replicate trains from the same initial weights, with the same batch
//! order seed, against the same eval corpus; only the manipulated variable
//! differs. Replicates vary exactly those two training seeds.

use std::collections::BTreeSet;
use std::path::Path;
use std::time::Instant;

use crate::corpus::{generate_corpus, write_manifest, CorpusManifest};
use crate::curation::{
    bin_by_confidence, coverage_sample, fit_kmeans, inject_noise, quantity_subsets, BinSpec,
    NoiseSpec,
};
use crate::error::{Error, Result};
use crate::metrics::{exact_match, one_minus_edit_dist};
use crate::provenance::Provenance;
use crate::recognizer::par::par_map;
use crate::recognizer::{
    predict_dataset, score_dataset, train, embed_dataset, EmbedKind, ModelParams, TrainConfig,
};
use crate::rng::{hash64, shuffle, stream};

use super::result::AblationResult;
use super::spec::{StudyKind, StudySpec};

/// Share of the pool reserved for the difficulty study's bootstrap model,
/// disjoint from every condition's training set.
const BOOTSTRAP_FRACTION: f64 = 0.2;

/// K-means convergence knobs for the diversity study.
const KMEANS_MAX_ITERS: usize = 100;
const KMEANS_TOL: f64 = 1e-6;

#[derive(Debug)]
enum Condition {
    Ready {
        label: String,
        manifest: CorpusManifest,
    },
    Skipped {
        label: String,
        population: usize,
    },
}

/// Runs every (condition, replicate) of the study and returns one row per
/// pair, conditions in ascending order. `work_dir` receives the generated
/// corpus plus the pool/eval split manifests; `jobs` parallelizes
/// independent trainings without affecting any result.
///
/// Pool and eval are disjoint slices of ONE generated corpus: the first
/// `corpus.n` samples feed the conditions, the last `eval_size` are the
/// shared held-out split. One corpus means one glyph atlas, so eval measures
/// generalization to fresh samples, not to a different typeface.
pub fn run_study(spec: &StudySpec, work_dir: &Path, jobs: usize) -> Result<Vec<AblationResult>> {
    spec.validate()?;
    std::fs::create_dir_all(work_dir).map_err(|e| Error::io(work_dir, e))?;

    log::info!(
        "{} study: generating pool of {} plus eval of {}",
        spec.kind.name(),
        spec.corpus.n,
        spec.eval_size
    );
    let mut corpus_spec = spec.corpus.clone();
    corpus_spec.n = spec.corpus.n + spec.eval_size;
    let corpus = generate_corpus(
        &corpus_spec,
        &work_dir.join("corpus"),
        Some(Provenance::library("study-corpus", corpus_spec.seed)),
    )?;
    let pool_ids: BTreeSet<String> = corpus.records[..spec.corpus.n]
        .iter()
        .map(|r| r.id.clone())
        .collect();
    let eval_ids: BTreeSet<String> = corpus.records[spec.corpus.n..]
        .iter()
        .map(|r| r.id.clone())
        .collect();
    let pool = corpus.subset(&pool_ids);
    let eval = corpus.subset(&eval_ids);
    write_manifest(&pool.clone().resolved(), &work_dir.join("pool.jsonl"))?;
    write_manifest(&eval.clone().resolved(), &work_dir.join("eval.jsonl"))?;

    let conditions = match &spec.kind {
        StudyKind::Difficulty { boundaries } => {
            difficulty_conditions(spec, boundaries, &pool, jobs)?
        }
        StudyKind::Accuracy { rates } => accuracy_conditions(spec, rates, &pool)?,
        StudyKind::Diversity { coverage, k } => {
            diversity_conditions(spec, coverage, *k, &pool, jobs)?
        }
        StudyKind::Quantity { sizes } => quantity_conditions(spec, sizes, &pool)?,
    };

    // Shared per-replicate seeds: the same init and batch order for every
    // condition, so conditions differ only in their data.
    let vocab = &pool.header.vocabulary;
    let inits: Vec<ModelParams> = (0..spec.replicates)
        .map(|r| {
            ModelParams::init(
                vocab,
                &spec.frame,
                spec.train.hidden,
                hash64(spec.seed, "init", &[r as u64]),
            )
        })
        .collect();
    let train_seeds: Vec<u64> = (0..spec.replicates)
        .map(|r| hash64(spec.seed, "train", &[r as u64]))
        .collect();

    let ready: Vec<(&str, &CorpusManifest)> = conditions
        .iter()
        .filter_map(|c| match c {
            Condition::Ready { label, manifest } => Some((label.as_str(), manifest)),
            Condition::Skipped { .. } => None,
        })
        .collect();
    let study = spec.kind.name();
    let outcomes = par_map(ready.len() * spec.replicates, jobs, |t| {
        let (label, manifest) = ready[t / spec.replicates];
        let r = t % spec.replicates;
        let started = Instant::now();
        let mut cfg: TrainConfig = spec.train.clone();
        cfg.seed = train_seeds[r];
        log::info!("{study}/{label} replicate {r}: training on {} samples", manifest.records.len());
        let outcome = train(manifest, &cfg, &spec.frame, None, Some(inits[r].clone()))?;
        let pairs = predict_dataset(&outcome.params, &eval, &spec.frame, 1)?;
        let em = exact_match(&pairs)?;
        let oned = one_minus_edit_dist(&pairs)?;
        log::info!("{study}/{label} replicate {r}: exact_match {em:.4}");
        Ok((em, oned, started.elapsed().as_secs_f64()))
    })?;

    let mut rows = Vec::with_capacity(conditions.len() * spec.replicates);
    let mut done = 0;
    for cond in &conditions {
        match cond {
            Condition::Skipped { label, population } => {
                log::warn!(
                    "{study}/{label}: population {population} under budget; condition skipped"
                );
                for r in 0..spec.replicates {
                    rows.push(AblationResult {
                        study: study.to_string(),
                        condition: label.clone(),
                        replicate: r,
                        train_size: 0,
                        exact_match: None,
                        one_minus_edit_dist: None,
                        wall_seconds: 0.0,
                        seed: train_seeds[r],
                        skipped: Some(*population),
                    });
                }
            }
            Condition::Ready { label, manifest } => {
                for r in 0..spec.replicates {
                    let (em, oned, wall) = outcomes[done * spec.replicates + r];
                    rows.push(AblationResult {
                        study: study.to_string(),
                        condition: label.clone(),
                        replicate: r,
                        train_size: manifest.records.len(),
                        exact_match: Some(em),
                        one_minus_edit_dist: Some(oned),
                        wall_seconds: wall,
                        seed: train_seeds[r],
                        skipped: None,
                    });
                }
                done += 1;
            }
        }
    }
    Ok(rows)
}

fn sorted_ids(manifest: &CorpusManifest) -> Vec<String> {
    let mut ids: Vec<String> = manifest.records.iter().map(|r| r.id.clone()).collect();
    ids.sort_unstable();
    ids
}

fn subset_of(manifest: &CorpusManifest, ids: Vec<String>) -> CorpusManifest {
    let keep: BTreeSet<String> = ids.into_iter().collect();
    manifest.subset(&keep)
}

/// Bootstrap on a disjoint 20% split, score the rest, and cut one condition
/// per confidence bin. Bins short of the budget become skipped conditions.
fn difficulty_conditions(
    spec: &StudySpec,
    boundaries: &[f64],
    pool: &CorpusManifest,
    jobs: usize,
) -> Result<Vec<Condition>> {
    let budget = spec.fixed_budget.expect("validated");
    let mut ids = sorted_ids(pool);
    shuffle(&mut ids, &mut stream(spec.seed, "bootstrap-split", &[]));
    let n_boot = (ids.len() as f64 * BOOTSTRAP_FRACTION).round() as usize;
    if n_boot == 0 || n_boot == ids.len() {
        return Err(Error::data(format!(
            "pool of {} cannot spare a bootstrap split",
            ids.len()
        )));
    }
    let boot = subset_of(pool, ids[..n_boot].to_vec());
    let candidates = subset_of(pool, ids[n_boot..].to_vec());

    log::info!("difficulty: training bootstrap scorer on {n_boot} samples");
    let mut cfg = spec.train.clone();
    cfg.seed = hash64(spec.seed, "bootstrap", &[]);
    let bootstrap = train(&boot, &cfg, &spec.frame, None, None)?;
    let scored = score_dataset(&bootstrap.params, &candidates, &spec.frame, jobs)?;

    let bins = BinSpec::new(boundaries.to_vec())?;
    let binned = bin_by_confidence(&scored, &bins)?;
    let mut out = Vec::new();
    for b in 0..bins.n_bins() {
        let label = bins.label(b);
        let population = binned.ids[b].len();
        if population < budget {
            out.push(Condition::Skipped { label, population });
            continue;
        }
        let mut bin_ids = binned.ids[b].clone();
        shuffle(&mut bin_ids, &mut stream(spec.seed, "difficulty-draw", &[b as u64]));
        bin_ids.truncate(budget);
        out.push(Condition::Ready {
            label,
            manifest: subset_of(&scored, bin_ids),
        });
    }
    Ok(out)
}

/// One base subset, re-noised at each rate under one noise seed: the victim
/// sets nest across rates and the images never change.
fn accuracy_conditions(
    spec: &StudySpec,
    rates: &[f64],
    pool: &CorpusManifest,
) -> Result<Vec<Condition>> {
    let budget = spec.fixed_budget.expect("validated");
    if pool.records.iter().any(|r| r.corrupted) {
        return Err(Error::data(
            "accuracy study needs a clean pool; found corrupted records",
        ));
    }
    let mut ids = sorted_ids(pool);
    shuffle(&mut ids, &mut stream(spec.seed, "accuracy-base", &[]));
    ids.truncate(budget);
    let base = subset_of(pool, ids);

    let noise_seed = hash64(spec.seed, "noise", &[]);
    rates
        .iter()
        .map(|&p| {
            let manifest = inject_noise(&base, &NoiseSpec::new(p, noise_seed))?;
            Ok(Condition::Ready {
                label: format!("p={p}"),
                manifest,
            })
        })
        .collect()
}

/// Cluster the pool on pixel embeddings once, then draw the budget from the
/// first m clusters of one seeded cluster order, so coverage sets nest.
fn diversity_conditions(
    spec: &StudySpec,
    coverage: &[usize],
    k: usize,
    pool: &CorpusManifest,
    jobs: usize,
) -> Result<Vec<Condition>> {
    let budget = spec.fixed_budget.expect("validated");
    log::info!("diversity: clustering {} pool embeddings into k={k}", pool.records.len());
    let emb = embed_dataset(None, pool, EmbedKind::Pixel, &spec.frame, jobs)?;
    let ids: Vec<String> = pool.records.iter().map(|r| r.id.clone()).collect();
    let model = fit_kmeans(
        &emb,
        &ids,
        k,
        KMEANS_MAX_ITERS,
        KMEANS_TOL,
        hash64(spec.seed, "kmeans", &[]),
    )?;
    coverage
        .iter()
        .map(|&m| {
            let drawn = coverage_sample(&model, m, budget, spec.seed)?;
            Ok(Condition::Ready {
                label: format!("m={m}"),
                manifest: subset_of(pool, drawn),
            })
        })
        .collect()
}

/// Nested prefixes of one pool shuffle: growing a set never swaps a sample.
fn quantity_conditions(
    spec: &StudySpec,
    sizes: &[usize],
    pool: &CorpusManifest,
) -> Result<Vec<Condition>> {
    let ids = sorted_ids(pool);
    let subsets = quantity_subsets(&ids, sizes, spec.seed)?;
    Ok(sizes
        .iter()
        .zip(subsets)
        .map(|(&n, subset)| Condition::Ready {
            label: format!("n={n}"),
            manifest: subset_of(pool, subset),
        })
        .collect())
}
