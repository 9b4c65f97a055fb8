//! Command line interface.
//!
//! Conventions shared by every subcommand:
//!
//! * inputs are validated before anything is written; no command mutates an
//!   input file in place;
//! * artifacts go into the `--out` directory, always with a
//!   `provenance.json` recording the exact command, a hash of the effective
//!   config, and the seed;
//! * logs go to stderr (`--config` sets the default level, `RUST_LOG`
//!   overrides); stdout carries only explicitly requested output such as
//!   `--dry-run` summaries;
//! * a `--config` file provides defaults, explicit flags override them;
//! * exit codes: 0 success, 2 usage error, 3 data error, 4 numerical
//!   failure.

mod config;
mod exec;
mod selftest;

pub use config::GlobalConfig;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "curalab",
    version,
    about = "Data curation laboratory for a small text-line recognizer",
    propagate_version = true
)]
struct Cli {
    /// Global config JSON (seed, directories, frame/train/bin defaults);
    /// explicit flags override config values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads for batch phases (scoring, embedding, studies).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic text-line corpus with a manifest.
    Generate(GenerateArgs),
    /// Train the recognizer on a manifest's train split.
    Train(TrainArgs),
    /// Fill per-record confidence scores using a trained model.
    Score(ScoreArgs),
    /// Export one feature vector per record.
    Embed(EmbedArgs),
    /// Fit a k-means model over exported embeddings.
    Cluster(ClusterArgs),
    /// Build a curated training subset from a plan.
    Curate(CurateArgs),
    /// Compute accuracy metrics from predictions.
    Evaluate(EvaluateArgs),
    /// Run a complete data-quality study.
    Ablate(AblateArgs),
    /// Rebuild summary and plot tables from a results table.
    Report(ReportArgs),
    /// Check the numerical core against brute-force oracles.
    Selftest,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Full generation spec JSON; the flags below override its fields.
    #[arg(long, value_name = "FILE")]
    spec: Option<PathBuf>,
    /// Number of samples (required unless --spec is given).
    #[arg(long)]
    n: Option<usize>,
    /// Number of visual styles, spread evenly over the style range.
    /// Overriding this resets any per-style sigma profile from --spec.
    #[arg(long)]
    styles: Option<usize>,
    /// Vocabulary as a literal string of symbols, e.g. "abc097".
    #[arg(long)]
    vocab: Option<String>,
    /// Minimum label length.
    #[arg(long)]
    len_min: Option<usize>,
    /// Maximum label length.
    #[arg(long)]
    len_max: Option<usize>,
    /// Lower end of the noise sigma range, applied to every style.
    #[arg(long, requires = "sigma_max")]
    sigma_min: Option<f64>,
    /// Upper end of the noise sigma range, applied to every style.
    #[arg(long, requires = "sigma_min")]
    sigma_max: Option<f64>,
    /// Fraction of samples marked as the eval split.
    #[arg(long)]
    eval_fraction: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output corpus directory (manifest.jsonl, img/, provenance.json).
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Training manifest (JSONL).
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    /// Warm-start checkpoint; frame geometry and vocabulary come from it.
    #[arg(long, value_name = "FILE")]
    init: Option<PathBuf>,
    /// Per-style sampling weights JSON ({"style_id": weight}); defaults to
    /// the weights embedded in the manifest's curation plan, if any.
    #[arg(long, value_name = "FILE")]
    weights: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    base_lr: Option<f64>,
    #[arg(long)]
    warmup_epochs: Option<usize>,
    #[arg(long)]
    momentum: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    /// Hidden layer width (fresh models only; conflicts with --init).
    #[arg(long, conflicts_with = "init")]
    hidden: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output run directory (model.ckpt, train_log.csv, provenance.json).
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    /// Trained checkpoint.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Manifest to score.
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    /// Output directory (manifest.jsonl with confidences, scores.csv).
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EmbedArgs {
    /// Manifest to embed.
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    /// Feature extractor: "pixel" (model-free) or "hidden" (needs --model).
    #[arg(long, default_value = "pixel")]
    kind: String,
    /// Checkpoint for the hidden extractor.
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Output directory (embeddings.bin).
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    /// Embeddings file written by `embed`.
    #[arg(long, value_name = "FILE")]
    embeddings: PathBuf,
    /// Manifest the embeddings were computed from (supplies sample ids).
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    /// Number of clusters.
    #[arg(long)]
    k: usize,
    /// Lloyd iteration cap.
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    /// Convergence threshold on total centroid shift.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (cluster.json, centroids.bin, assignments.csv).
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CurateArgs {
    /// Curation plan JSON.
    #[arg(long, value_name = "FILE")]
    plan: PathBuf,
    /// Overrides the plan's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Print the resolved stages and quotas without writing anything.
    #[arg(long)]
    dry_run: bool,
    /// Output directory for the derived manifest.
    #[arg(long, value_name = "DIR", required_unless_present = "dry_run")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Prediction pairs CSV (id,category,reference,prediction).
    #[arg(long, value_name = "FILE", conflicts_with_all = ["model", "manifest"])]
    pairs: Option<PathBuf>,
    /// Checkpoint to predict with (alternative to --pairs).
    #[arg(long, value_name = "FILE", requires = "manifest")]
    model: Option<PathBuf>,
    /// Manifest to predict on (labels are the references).
    #[arg(long, value_name = "FILE", requires = "model")]
    manifest: Option<PathBuf>,
    /// Category weights JSON ({"category": weight}).
    #[arg(long, value_name = "FILE")]
    weights: Option<PathBuf>,
    /// Output directory (report.json, per_category.csv, pairs.csv).
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AblateArgs {
    /// Study spec JSON.
    #[arg(long, value_name = "FILE")]
    spec: PathBuf,
    /// Expected study kind; fails if the spec declares a different one.
    #[arg(long)]
    study: Option<String>,
    /// Print the conditions and budgets without running anything.
    #[arg(long)]
    dry_run: bool,
    /// Output directory (results.csv, timings.csv, summary.json, plots/).
    #[arg(long, value_name = "DIR", required_unless_present = "dry_run")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Results table written by `ablate` (results.csv).
    #[arg(long, value_name = "FILE")]
    results: PathBuf,
    /// Output directory; wall times absent from the input come back as zero.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

/// Entry point behind `main`; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match try_run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("curalab: {e}");
            e.exit_code()
        }
    }
}

fn try_run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => GlobalConfig::load(path)?,
        None => GlobalConfig::default(),
    };
    init_logger(&cfg.log_level);
    let jobs = cli.jobs.unwrap_or(1);
    if jobs == 0 {
        return Err(Error::usage("--jobs must be at least 1"));
    }
    exec::dispatch(cli.command, jobs, &cfg)
}

fn init_logger(level: &str) {
    let env = env_logger::Env::default().default_filter_or(level);
    let _ = env_logger::Builder::from_env(env)
        .format_timestamp(None)
        .try_init();
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parser_accepts_every_subcommand() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_with_code_two() {
        use clap::CommandFactory;
        let err = Cli::command()
            .try_get_matches_from(["curalab", "train", "--out", "x"])
            .unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("--manifest"));
        let err = Cli::command()
            .try_get_matches_from(["curalab", "frobnicate"])
            .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn flag_conflicts_are_rejected_at_parse_time() {
        use clap::CommandFactory;
        let err = Cli::command().try_get_matches_from([
            "curalab", "evaluate", "--pairs", "p.csv", "--model", "m.ckpt", "--manifest", "d.jsonl",
            "--out", "r",
        ]);
        assert!(err.is_err());
        let err = Cli::command().try_get_matches_from([
            "curalab", "train", "--manifest", "m", "--init", "c.ckpt", "--hidden", "32", "--out",
            "r",
        ]);
        assert!(err.is_err());
    }
}
