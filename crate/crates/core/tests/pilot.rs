//! Throwaway calibration pilots. Run one at a time:
//!   cargo test --test pilot -- --ignored --nocapture <name>

use std::time::Instant;

use curalab::corpus::{generate_corpus, GenerateSpec, StyleSpec, Vocabulary};
use curalab::recognizer::{train, FrameConfig, TrainConfig};

fn pilot_corpus(tmp: &std::path::Path) -> curalab::corpus::CorpusManifest {
    let mut spec = GenerateSpec::new(
        5000,
        StyleSpec::spread(4),
        Vocabulary::lowercase_latin(),
        41,
    )
    .with_sigma_range(0.0, 0.1);
    spec.eval_fraction = 0.1;
    generate_corpus(&spec, tmp, None).unwrap()
}

#[test]
#[ignore]
fn pilot_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let manifest = pilot_corpus(tmp.path());
    drop(manifest);
    for corpus_seed in [7u64, 41, 99, 123, 2024] {
        let dir = tmp.path().join(format!("c{corpus_seed}"));
        let mut spec = GenerateSpec::new(
            5000,
            StyleSpec::spread(4),
            Vocabulary::lowercase_latin(),
            corpus_seed,
        )
        .with_sigma_range(0.0, 0.1);
        spec.eval_fraction = 0.1;
        let manifest = generate_corpus(&spec, &dir, None).unwrap();
        for lr in [0.05f64, 0.06] {
            let cfg = TrainConfig {
                base_lr: lr,
                ..TrainConfig::default()
            };
            let out = train(&manifest, &cfg, &FrameConfig::default(), None, None).unwrap();
            let last = out.log.last().unwrap();
            println!(
                "corpus {corpus_seed:4} lr {lr:5.3} -> loss {:7.4} em {:?}",
                last.mean_loss, last.eval_exact_match
            );
        }
    }
}

#[test]
#[ignore]
fn pilot_trainability() {
    let tmp = tempfile::tempdir().unwrap();
    let t0 = Instant::now();
    let manifest = pilot_corpus(tmp.path());
    println!("generate: {:.1}s", t0.elapsed().as_secs_f64());

    let t1 = Instant::now();
    let cfg = TrainConfig::default();
    let out = train(&manifest, &cfg, &FrameConfig::default(), None, None).unwrap();
    println!("train 20 epochs: {:.1}s", t1.elapsed().as_secs_f64());
    for row in &out.log {
        println!(
            "epoch {:2}  loss {:8.4}  em {:?}  lr {:.4}",
            row.epoch, row.mean_loss, row.eval_exact_match, row.lr
        );
    }
}

#[test]
#[ignore]
fn emit_pilot_specs() {
    use curalab::experiments::{StudyKind, StudySpec};
    use curalab::recognizer::TrainConfig;

    let train = TrainConfig {
        epochs: 14,
        ..TrainConfig::default()
    };
    let corpus = |n: usize, sigma_hi: f64, seed: u64| {
        GenerateSpec::new(n, StyleSpec::spread(4), Vocabulary::lowercase_latin(), seed)
            .with_sigma_range(0.0, sigma_hi)
    };
    let specs = [
        (
            "quantity",
            StudySpec {
                kind: StudyKind::Quantity {
                    sizes: vec![1000, 2000, 3000, 4000, 5000],
                },
                fixed_budget: None,
                corpus: corpus(6000, 0.15, 501),
                eval_size: 2000,
                train: train.clone(),
                frame: FrameConfig::default(),
                seed: 9001,
                replicates: 3,
            },
        ),
        (
            "accuracy",
            StudySpec {
                kind: StudyKind::Accuracy {
                    rates: vec![0.0, 0.05, 0.10, 0.15, 0.20],
                },
                fixed_budget: Some(2500),
                corpus: corpus(3000, 0.1, 502),
                eval_size: 2000,
                train: train.clone(),
                frame: FrameConfig::default(),
                seed: 9002,
                replicates: 3,
            },
        ),
        (
            "diversity",
            StudySpec {
                kind: StudyKind::Diversity {
                    coverage: vec![10, 20, 30, 40, 50],
                    k: 50,
                },
                fixed_budget: Some(5000),
                corpus: corpus(36000, 0.15, 503),
                eval_size: 2000,
                train: train.clone(),
                frame: FrameConfig::default(),
                seed: 9003,
                replicates: 3,
            },
        ),
        (
            "difficulty",
            StudySpec {
                kind: StudyKind::Difficulty {
                    boundaries: vec![0.5, 0.7, 0.8, 0.85, 0.9, 0.93, 0.95, 0.97],
                },
                fixed_budget: Some(600),
                corpus: corpus(25000, 0.5, 504),
                eval_size: 2000,
                train,
                frame: FrameConfig::default(),
                seed: 9004,
                replicates: 3,
            },
        ),
    ];
    for (name, spec) in specs {
        spec.validate().expect(name);
        let path = format!("/root/pilot/{name}.json");
        std::fs::write(&path, serde_json::to_string_pretty(&spec).unwrap()).unwrap();
        println!("wrote {path}");
    }
}
