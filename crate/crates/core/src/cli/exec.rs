//! Subcommand handlers. Each one validates its inputs, does the work through
//! the library API, writes artifacts under its own `--out` directory, and
//! drops a `provenance.json` beside them.

use std::collections::BTreeMap;
use std::path::Path;

use log::info;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::corpus::{
    generate_corpus, read_manifest, write_manifest, GenerateSpec, Split, StyleSpec, Vocabulary,
};
use crate::curation::{apply_plan, fit_kmeans, plan_echo, save_cluster_model, CurationPlan};
use crate::error::{Error, Result};
use crate::experiments::{emit_report, read_results_csv, run_study, summarize, StudyKind, StudySpec};
use crate::metrics::{
    build_report, kahan_mean, read_pairs_csv, write_category_csv, write_pairs_csv, write_report,
    EvalPair,
};
use crate::provenance::Provenance;
use crate::recognizer::{
    embed_dataset, load_checkpoint, predict_dataset, read_embeddings, save_checkpoint,
    score_dataset, train, write_embeddings, write_epoch_log, write_scores_csv, CheckpointMeta,
    EmbedKind,
};

use super::config::GlobalConfig;
use super::{
    AblateArgs, ClusterArgs, Command, CurateArgs, EmbedArgs, EvaluateArgs, GenerateArgs,
    ReportArgs, ScoreArgs, TrainArgs,
};

pub(super) fn dispatch(cmd: Command, jobs: usize, cfg: &GlobalConfig) -> Result<()> {
    match cmd {
        Command::Generate(a) => generate(a, cfg),
        Command::Train(a) => train_cmd(a, cfg),
        Command::Score(a) => score(a, cfg, jobs),
        Command::Embed(a) => embed(a, cfg, jobs),
        Command::Cluster(a) => cluster(a, cfg),
        Command::Curate(a) => curate(a, cfg),
        Command::Evaluate(a) => evaluate(a, cfg, jobs),
        Command::Ablate(a) => ablate(a, cfg, jobs),
        Command::Report(a) => report(a, cfg),
        Command::Selftest => super::selftest::run_all(),
    }
}

fn argv_line() -> String {
    std::env::args().collect::<Vec<_>>().join(" ")
}

/// Provenance over the effective (post-override) config of the command.
fn provenance_for<T: Serialize>(effective_config: &T, seed: u64) -> Provenance {
    let json = serde_json::to_string(effective_config).expect("config serializes");
    Provenance::new(argv_line(), &json, seed)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::data(format!("{what} {}: {e}", path.display())))
}

fn generate(a: GenerateArgs, cfg: &GlobalConfig) -> Result<()> {
    let mut spec = match &a.spec {
        Some(path) => read_json::<GenerateSpec>(&cfg.input(path), "generation spec")?,
        None => {
            let n = a.n.ok_or_else(|| Error::usage("pass --n or --spec"))?;
            GenerateSpec::new(
                n,
                StyleSpec::spread(a.styles.unwrap_or(4)),
                Vocabulary::lowercase_latin(),
                cfg.seed,
            )
        }
    };
    if let Some(n) = a.n {
        spec.n = n;
    }
    if let Some(k) = a.styles {
        spec.styles = StyleSpec::spread(k);
        spec.difficulty_profile.clear();
    }
    if let Some(v) = &a.vocab {
        spec.vocab = Vocabulary::new(v)?;
    }
    if let Some(lo) = a.len_min {
        spec.label_len.0 = lo;
    }
    if let Some(hi) = a.len_max {
        spec.label_len.1 = hi;
    }
    if let (Some(lo), Some(hi)) = (a.sigma_min, a.sigma_max) {
        spec = spec.with_sigma_range(lo, hi);
    }
    if let Some(f) = a.eval_fraction {
        spec.eval_fraction = f;
    }
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    spec.validate()?;

    let out = cfg.corpus_output(&a.out);
    let prov = provenance_for(&spec, spec.seed);
    let manifest = generate_corpus(&spec, &out, Some(prov))?;
    let eval = manifest
        .records
        .iter()
        .filter(|r| r.split == Split::Eval)
        .count();
    info!(
        "generate: {} samples ({} eval) in {}",
        manifest.records.len(),
        eval,
        out.display()
    );
    Ok(())
}

fn train_cmd(a: TrainArgs, cfg: &GlobalConfig) -> Result<()> {
    let mut tc = cfg.train.clone();
    if let Some(v) = a.epochs {
        tc.epochs = v;
    }
    if let Some(v) = a.batch_size {
        tc.batch_size = v;
    }
    if let Some(v) = a.base_lr {
        tc.base_lr = v;
    }
    if let Some(v) = a.warmup_epochs {
        tc.warmup_epochs = v;
    }
    if let Some(v) = a.momentum {
        tc.momentum = v;
    }
    if let Some(v) = a.weight_decay {
        tc.weight_decay = v;
    }
    if let Some(v) = a.hidden {
        tc.hidden = v;
    }
    if let Some(v) = a.seed {
        tc.seed = v;
    }

    let manifest = read_manifest(&cfg.input(&a.manifest))?;
    let (init, frame) = match &a.init {
        Some(path) => {
            let (params, meta) = load_checkpoint(&cfg.input(path))?;
            if meta.vocab != manifest.header.vocabulary {
                return Err(Error::data(
                    "checkpoint vocabulary does not match the manifest",
                ));
            }
            (Some(params), meta.frame)
        }
        None => (None, cfg.frame.clone()),
    };
    let weights: Option<BTreeMap<u32, f64>> = match &a.weights {
        Some(path) => Some(read_json(&cfg.input(path), "style weights")?),
        None => plan_echo(&manifest)?.and_then(|p| p.category_weights),
    };
    if weights.is_some() {
        info!("train: oversampling by style weights");
    }

    let out = cfg.output(&a.out);
    ensure_dir(&out)?;
    let prov = provenance_for(&tc, tc.seed);
    let outcome = train(&manifest, &tc, &frame, weights.as_ref(), init)?;
    let meta = CheckpointMeta {
        vocab: manifest.header.vocabulary.clone(),
        frame: frame.clone(),
        train: Some(tc.clone()),
        provenance: Some(prov.clone()),
    };
    save_checkpoint(&out.join("model.ckpt"), &outcome.params, &meta)?;
    write_epoch_log(&out.join("train_log.csv"), &outcome.log)?;
    prov.write_into(&out)?;

    let last = outcome.log.last().expect("at least one epoch");
    match last.eval_exact_match {
        Some(em) => info!(
            "train: {} epochs, final loss {:.4}, eval exact match {:.4}, model in {}",
            tc.epochs,
            last.mean_loss,
            em,
            out.display()
        ),
        None => info!(
            "train: {} epochs, final loss {:.4}, model in {}",
            tc.epochs,
            last.mean_loss,
            out.display()
        ),
    }
    if outcome.skipped_infeasible > 0 {
        info!(
            "train: skipped {} samples whose labels cannot fit their frames",
            outcome.skipped_infeasible
        );
    }
    Ok(())
}

fn score(a: ScoreArgs, cfg: &GlobalConfig, jobs: usize) -> Result<()> {
    let model_path = cfg.input(&a.model);
    let (params, meta) = load_checkpoint(&model_path)?;
    let manifest = read_manifest(&cfg.input(&a.manifest))?;
    let scored = score_dataset(&params, &manifest, &meta.frame, jobs)?.resolved();

    let out = cfg.output(&a.out);
    ensure_dir(&out)?;
    write_manifest(&scored, &out.join("manifest.jsonl"))?;
    write_scores_csv(&out.join("scores.csv"), &scored)?;
    let seed = meta.provenance.as_ref().map_or(cfg.seed, |p| p.seed);
    provenance_for(&serde_json::json!({ "model": model_path }), seed).write_into(&out)?;

    let mean = kahan_mean(scored.records.iter().filter_map(|r| r.confidence)).unwrap_or(0.0);
    info!(
        "score: {} records, mean confidence {:.4}, manifest in {}",
        scored.records.len(),
        mean,
        out.display()
    );
    Ok(())
}

fn embed(a: EmbedArgs, cfg: &GlobalConfig, jobs: usize) -> Result<()> {
    let kind = EmbedKind::parse(&a.kind)?;
    let (params, frame) = match &a.model {
        Some(path) => {
            let (params, meta) = load_checkpoint(&cfg.input(path))?;
            (Some(params), meta.frame)
        }
        None => (None, cfg.frame.clone()),
    };
    let manifest = read_manifest(&cfg.input(&a.manifest))?;
    let emb = embed_dataset(params.as_ref(), &manifest, kind, &frame, jobs)?;

    let out = cfg.output(&a.out);
    ensure_dir(&out)?;
    write_embeddings(&out.join("embeddings.bin"), &emb)?;
    provenance_for(&serde_json::json!({ "kind": kind }), cfg.seed).write_into(&out)?;
    info!(
        "embed: {} vectors of dim {} in {}",
        emb.count(),
        emb.dim,
        out.display()
    );
    Ok(())
}

fn cluster(a: ClusterArgs, cfg: &GlobalConfig) -> Result<()> {
    let emb = read_embeddings(&cfg.input(&a.embeddings))?;
    let manifest = read_manifest(&cfg.input(&a.manifest))?;
    let ids: Vec<String> = manifest.records.iter().map(|r| r.id.clone()).collect();
    let seed = a.seed.unwrap_or(cfg.seed);
    let model = fit_kmeans(&emb, &ids, a.k, a.max_iters, a.tol, seed)?;

    let out = cfg.output(&a.out);
    ensure_dir(&out)?;
    save_cluster_model(&out, &model)?;
    provenance_for(&serde_json::json!({ "k": a.k, "max_iters": a.max_iters, "tol": a.tol }), seed)
        .write_into(&out)?;
    info!(
        "cluster: k={} converged to inertia {:.3} after {} iterations, model in {}",
        model.k,
        model.inertia,
        model.inertia_history.len(),
        out.display()
    );
    Ok(())
}

fn curate(a: CurateArgs, cfg: &GlobalConfig) -> Result<()> {
    let plan_path = cfg.input(&a.plan);
    let mut plan: CurationPlan = read_json(&plan_path, "curation plan")?;
    plan.source = cfg.input(&plan.source);
    if let Some(cov) = &mut plan.coverage {
        cov.model_dir = cfg.input(&cov.model_dir);
    }
    if let Some(s) = a.seed {
        plan.seed = s;
    }
    if plan.ratios.is_some() && plan.boundaries.is_none() {
        plan.boundaries = Some(cfg.bins.clone());
    }
    plan.validate()?;

    if a.dry_run {
        return print_plan(&plan_path, &plan);
    }

    let derived = apply_plan(&plan)?.resolved();
    let out = cfg.output(a.out.as_deref().expect("clap requires --out"));
    ensure_dir(&out)?;
    write_manifest(&derived, &out.join("manifest.jsonl"))?;
    provenance_for(&plan, plan.seed).write_into(&out)?;

    let corrupted = derived.records.iter().filter(|r| r.corrupted).count();
    info!(
        "curate: {} records ({} corrupted) in {}",
        derived.records.len(),
        corrupted,
        out.display()
    );
    Ok(())
}

/// Dry-run summary: echoes each stage the plan would execute, in order.
fn print_plan(path: &Path, plan: &CurationPlan) -> Result<()> {
    let pool = read_manifest(&plan.source)?;
    let n_train = pool
        .records
        .iter()
        .filter(|r| r.split == Split::Train)
        .count();
    println!("plan {}", path.display());
    println!("  pool: {} ({} train records)", plan.source.display(), n_train);
    println!("  target: {} samples", plan.target_size);
    if let Some(ratios) = &plan.ratios {
        let bins = plan.boundaries.clone().unwrap_or_default();
        let take = if plan.coverage.is_some() {
            (2 * plan.target_size).min(n_train)
        } else {
            plan.target_size
        };
        let labels: Vec<String> = (0..bins.n_bins()).map(|b| bins.label(b)).collect();
        println!(
            "  difficulty: keep {} across bins {} with ratios {:?}",
            take,
            labels.join(", "),
            ratios.fractions
        );
    }
    if let Some(cov) = &plan.coverage {
        println!(
            "  coverage: draw from {} clusters of the model in {}",
            cov.clusters_used,
            cov.model_dir.display()
        );
    }
    if let Some(noise) = &plan.noise {
        let hits = (plan.target_size as f64 * noise.rate).round() as usize;
        println!(
            "  noise: corrupt rate {} ({} labels at the target size)",
            noise.rate, hits
        );
    }
    if let Some(w) = &plan.category_weights {
        println!("  weights: {} styles tagged for oversampling", w.len());
    }
    println!("  seed: {}", plan.seed);
    Ok(())
}

fn evaluate(a: EvaluateArgs, cfg: &GlobalConfig, jobs: usize) -> Result<()> {
    let pairs: Vec<EvalPair> = match (&a.pairs, &a.model, &a.manifest) {
        (Some(path), None, None) => read_pairs_csv(&cfg.input(path))?,
        (None, Some(model), Some(data)) => {
            let (params, meta) = load_checkpoint(&cfg.input(model))?;
            let manifest = read_manifest(&cfg.input(data))?;
            predict_dataset(&params, &manifest, &meta.frame, jobs)?
        }
        _ => return Err(Error::usage("pass --pairs, or --model with --manifest")),
    };
    let weights: Option<BTreeMap<String, f64>> = match &a.weights {
        Some(path) => Some(read_json(&cfg.input(path), "category weights")?),
        None => None,
    };
    let report = build_report(&pairs, weights.as_ref())?;

    let out = cfg.output(&a.out);
    ensure_dir(&out)?;
    write_report(&out.join("report.json"), &report)?;
    write_category_csv(&out.join("per_category.csv"), &report)?;
    write_pairs_csv(&out.join("pairs.csv"), &pairs)?;
    provenance_for(&report.weights, cfg.seed).write_into(&out)?;

    info!(
        "evaluate: n={} exact match {:.4}, 1-NED {:.4}, weighted {:.4}, report in {}",
        report.n,
        report.exact_match,
        report.one_minus_edit_dist,
        report.weighted_accuracy,
        out.display()
    );
    Ok(())
}

fn ablate(a: AblateArgs, cfg: &GlobalConfig, jobs: usize) -> Result<()> {
    let spec: StudySpec = read_json(&cfg.input(&a.spec), "study spec")?;
    spec.validate()?;
    if let Some(name) = &a.study {
        if name != spec.kind.name() {
            return Err(Error::usage(format!(
                "--study {name} does not match the spec, which declares a {} study",
                spec.kind.name()
            )));
        }
    }

    if a.dry_run {
        print_study(&spec);
        return Ok(());
    }

    let out = cfg.output(a.out.as_deref().expect("clap requires --out"));
    ensure_dir(&out)?;
    let rows = run_study(&spec, &out.join("work"), jobs)?;
    emit_report(&rows, &out)?;
    provenance_for(&spec, spec.seed).write_into(&out)?;

    for (study, s) in summarize(&rows)? {
        let peak = s.peak_condition.as_deref().unwrap_or("none");
        info!(
            "ablate {study}: {} conditions x {} replicates, peak {peak}, report in {}",
            s.conditions.len(),
            s.replicates,
            out.display()
        );
    }
    Ok(())
}

/// Dry-run summary: one line per condition, then the shared settings.
fn print_study(spec: &StudySpec) {
    println!("study {}", spec.kind.name());
    match &spec.kind {
        StudyKind::Difficulty { boundaries } => {
            let bins = crate::curation::BinSpec {
                boundaries: boundaries.clone(),
            };
            let budget = spec.fixed_budget.unwrap_or(0);
            for b in 0..bins.n_bins() {
                println!("  condition {}: {} samples from that bin", bins.label(b), budget);
            }
        }
        StudyKind::Accuracy { rates } => {
            let budget = spec.fixed_budget.unwrap_or(0);
            for p in rates {
                println!("  condition p={p}: {budget} samples, {p} label corruption");
            }
        }
        StudyKind::Diversity { coverage, k } => {
            let budget = spec.fixed_budget.unwrap_or(0);
            for m in coverage {
                println!("  condition m={m}: {budget} samples from {m} of {k} clusters");
            }
        }
        StudyKind::Quantity { sizes } => {
            for n in sizes {
                println!("  condition n={n}: nested prefix of the pool");
            }
        }
    }
    println!("  pool: {} samples, eval: {}", spec.corpus.n, spec.eval_size);
    println!(
        "  replicates: {}, train epochs: {}, seed: {}",
        spec.replicates, spec.train.epochs, spec.seed
    );
}

fn report(a: ReportArgs, cfg: &GlobalConfig) -> Result<()> {
    let rows = read_results_csv(&cfg.input(&a.results))?;
    let out = cfg.output(&a.out);
    ensure_dir(&out)?;
    emit_report(&rows, &out)?;
    provenance_for(&serde_json::json!({ "rows": rows.len() }), cfg.seed).write_into(&out)?;
    info!(
        "report: {} rows across {} studies, tables in {}",
        rows.len(),
        summarize(&rows)?.len(),
        out.display()
    );
    Ok(())
}
