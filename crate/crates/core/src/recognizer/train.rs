//! Minibatch SGD training of the recognizer on a corpus manifest.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{read_pgm, CorpusManifest, Image, Split};
use crate::error::{Error, Result};
use crate::rng::{stream, weighted_index};

use super::ctc::{ctc_loss_indices, min_frames};
use super::decode::greedy_decode;
use super::frames::{extract_frames, FrameConfig};
use super::model::{Gradients, ModelParams};

/// Per-epoch eval decoding during training is capped at this many samples;
/// it is a progress signal, not the final measurement.
const EVAL_LOG_CAP: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub base_lr: f64,
    pub warmup_epochs: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub hidden: usize,
    pub seed: u64,
}

/// Defaults sized for desk-scale corpora (thousands of samples, minutes of
/// CPU), not production training.
impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 64,
            base_lr: 0.05,
            warmup_epochs: 2,
            momentum: 0.9,
            weight_decay: 0.0,
            hidden: 64,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.hidden == 0 {
            return Err(Error::data("epochs, batch_size, hidden must be positive"));
        }
        if self.warmup_epochs >= self.epochs {
            return Err(Error::data(format!(
                "warmup_epochs {} must be < epochs {}",
                self.warmup_epochs, self.epochs
            )));
        }
        if !(self.base_lr > 0.0) {
            return Err(Error::data("base_lr must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::data("momentum must be in [0, 1)"));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::data("weight_decay must be non-negative"));
        }
        Ok(())
    }
}

/// Cosine schedule with linear warmup. `step` is 1-based (the first update
/// is step 1): lr = base * step / warmup_steps through the warmup, then
/// base * 0.5 * (1 + cos(pi * progress)) where progress runs 0..1 over the
/// remaining steps.
pub fn learning_rate(step: usize, total_steps: usize, warmup_steps: usize, base_lr: f64) -> f64 {
    debug_assert!(step >= 1 && step <= total_steps);
    if warmup_steps > 0 && step <= warmup_steps {
        return base_lr * step as f64 / warmup_steps as f64;
    }
    if total_steps == warmup_steps {
        return base_lr;
    }
    let progress = (step - warmup_steps) as f64 / (total_steps - warmup_steps) as f64;
    base_lr * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    /// 1-based epoch number.
    pub epoch: usize,
    pub mean_loss: f64,
    /// Exact-match rate on (a capped slice of) the manifest's eval split;
    /// None when the manifest has no eval records.
    pub eval_exact_match: Option<f64>,
    /// Learning rate of the epoch's last step.
    pub lr: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub log: Vec<EpochStats>,
    /// Samples dropped because their label cannot fit their frame count.
    pub skipped_infeasible: usize,
}

struct LoadedSample {
    image: Image,
    label: String,
    indices: Vec<usize>,
    style_id: u32,
}

fn load_split(
    manifest: &CorpusManifest,
    split: Split,
    frame_cfg: &FrameConfig,
) -> Result<(Vec<LoadedSample>, usize)> {
    let vocab = &manifest.header.vocabulary;
    let mut out = Vec::new();
    let mut skipped = 0usize;
    for rec in manifest.split_records(split) {
        let path = manifest.resolve_image_path(rec);
        let image = read_pgm(&path)?;
        let indices = vocab.encode(&rec.label)?;
        let t = frame_cfg.frame_count(image.width);
        if t < min_frames(&indices) {
            skipped += 1;
            log::warn!(
                "skipping {}: label {:?} needs {} frames, image provides {t}",
                rec.id,
                rec.label,
                min_frames(&indices)
            );
            continue;
        }
        out.push(LoadedSample {
            image,
            label: rec.label.clone(),
            indices,
            style_id: rec.style_id,
        });
    }
    Ok((out, skipped))
}

fn exact_match_rate(
    params: &ModelParams,
    samples: &[LoadedSample],
    frame_cfg: &FrameConfig,
) -> Result<f64> {
    let mut hits = 0usize;
    for s in samples {
        let frames = extract_frames(&s.image, frame_cfg)?;
        let logits = params.forward(&frames)?;
        let (decoded, _) = greedy_decode(&logits, &params.vocab);
        if decoded == s.label {
            hits += 1;
        }
    }
    Ok(hits as f64 / samples.len().max(1) as f64)
}

/// Trains on the manifest's train split; the eval split (if present) feeds
/// the per-epoch log. `category_weights` switches the per-epoch pass from a
/// plain shuffle to drawing n samples with replacement, each sample's draw
/// probability proportional to its style's weight (oversampling). `init`
/// overrides the seeded fresh model, letting studies share one init across
/// conditions. Deterministic in (config, manifest, init).
pub fn train(
    manifest: &CorpusManifest,
    cfg: &TrainConfig,
    frame_cfg: &FrameConfig,
    category_weights: Option<&BTreeMap<u32, f64>>,
    init: Option<ModelParams>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    frame_cfg.validate()?;
    if manifest.header.cell_height != frame_cfg.cell_height {
        return Err(Error::data(format!(
            "manifest cell_height {} does not match frame config {}",
            manifest.header.cell_height, frame_cfg.cell_height
        )));
    }
    let vocab = &manifest.header.vocabulary;

    let (train_set, skipped_infeasible) = load_split(manifest, Split::Train, frame_cfg)?;
    if train_set.is_empty() {
        return Err(Error::data("no feasible train samples in manifest"));
    }
    let (eval_set, _) = load_split(manifest, Split::Eval, frame_cfg)?;
    let eval_slice = &eval_set[..eval_set.len().min(EVAL_LOG_CAP)];

    let mut params = match init {
        Some(p) => {
            p.validate()?;
            if p.vocab != *vocab {
                return Err(Error::data("init model vocabulary differs from manifest"));
            }
            if p.input_dim != frame_cfg.input_dim() {
                return Err(Error::data("init model input dim differs from frame config"));
            }
            p
        }
        None => ModelParams::init(vocab, frame_cfg, cfg.hidden, cfg.seed),
    };

    let sample_weights: Option<Vec<f64>> = match category_weights {
        Some(map) => {
            let mut ws = Vec::with_capacity(train_set.len());
            for s in &train_set {
                let w = *map.get(&s.style_id).ok_or_else(|| {
                    Error::data(format!("category_weights missing style {}", s.style_id))
                })?;
                if !(w.is_finite() && w >= 0.0) {
                    return Err(Error::data(format!(
                        "category weight for style {} must be >= 0",
                        s.style_id
                    )));
                }
                ws.push(w);
            }
            if ws.iter().sum::<f64>() <= 0.0 {
                return Err(Error::data("category weights sum to zero over the train set"));
            }
            Some(ws)
        }
        None => None,
    };

    let n = train_set.len();
    let steps_per_epoch = n.div_ceil(cfg.batch_size);
    let total_steps = steps_per_epoch * cfg.epochs;
    let warmup_steps = steps_per_epoch * cfg.warmup_epochs;

    let mut grads = Gradients::zeros_like(&params);
    let mut momentum_buf = Gradients::zeros_like(&params);
    let mut log_rows = Vec::with_capacity(cfg.epochs);
    let mut global_step = 0usize;

    for epoch in 1..=cfg.epochs {
        let order: Vec<usize> = match &sample_weights {
            Some(ws) => {
                let mut rng = stream(cfg.seed, "train-draw", &[epoch as u64]);
                (0..n).map(|_| weighted_index(ws, &mut rng)).collect()
            }
            None => {
                let mut perm: Vec<usize> = (0..n).collect();
                crate::rng::shuffle(&mut perm, &mut stream(cfg.seed, "train-shuffle", &[epoch as u64]));
                perm
            }
        };

        let mut epoch_loss = 0.0f64;
        let mut epoch_count = 0usize;
        let mut last_lr = 0.0f64;
        for batch in order.chunks(cfg.batch_size) {
            global_step += 1;
            let lr = learning_rate(global_step, total_steps, warmup_steps, cfg.base_lr);
            last_lr = lr;
            grads.clear();
            let mut batch_count = 0usize;
            for &ix in batch {
                let s = &train_set[ix];
                let frames = extract_frames(&s.image, frame_cfg)?;
                let pass = params.forward_cached(&frames).map_err(|e| {
                    Error::numerical(format!("epoch {epoch}, step {global_step}: {e}"))
                })?;
                let ctc = ctc_loss_indices(&pass.logits, &s.indices, vocab.blank_index())?;
                if !ctc.loss.is_finite() {
                    return Err(Error::numerical(format!(
                        "epoch {epoch}, step {global_step}: non-finite loss (diverged)"
                    )));
                }
                epoch_loss += ctc.loss;
                params.backward(&frames, &pass, &ctc.grad, &mut grads);
                batch_count += 1;
            }
            if batch_count == 0 {
                continue;
            }
            epoch_count += batch_count;
            grads.scale(1.0 / batch_count as f64);
            params.sgd_step(&grads, &mut momentum_buf, lr, cfg.momentum, cfg.weight_decay);
        }

        let eval_exact_match = if eval_slice.is_empty() {
            None
        } else {
            Some(exact_match_rate(&params, eval_slice, frame_cfg)?)
        };
        log_rows.push(EpochStats {
            epoch,
            mean_loss: epoch_loss / epoch_count.max(1) as f64,
            eval_exact_match,
            lr: last_lr,
        });
    }

    Ok(TrainOutcome {
        params,
        log: log_rows,
        skipped_infeasible,
    })
}

/// Writes the per-epoch log as `epoch,mean_loss,eval_exact_match,lr`.
pub fn write_epoch_log(path: &Path, log: &[EpochStats]) -> Result<()> {
    let mut out = String::from("epoch,mean_loss,eval_exact_match,lr\n");
    for row in log {
        let em = row
            .eval_exact_match
            .map(|v| v.to_string())
            .unwrap_or_default();
        out.push_str(&format!("{},{},{},{}\n", row.epoch, row.mean_loss, em, row.lr));
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{
        generate_corpus, write_manifest, write_pgm, GenerateSpec, ManifestHeader, SampleRecord,
        StyleSpec, Vocabulary,
    };

    fn tiny_corpus(n: usize, dir: &Path) -> CorpusManifest {
        let mut spec = GenerateSpec::new(
            n,
            StyleSpec::spread(2),
            Vocabulary::new("abc").unwrap(),
            11,
        );
        spec.label_len = (1, 3);
        spec.eval_fraction = 0.2;
        generate_corpus(&spec, dir, None).unwrap()
    }

    fn quick_cfg() -> TrainConfig {
        TrainConfig {
            epochs: 10,
            batch_size: 16,
            warmup_epochs: 1,
            hidden: 24,
            seed: 3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn warmup_midpoint_and_final_lr() {
        // Midpoint of warmup: exactly half the base rate.
        let lr = learning_rate(50, 1000, 100, 0.2);
        assert!((lr - 0.1).abs() < 1e-15);
        // End of warmup: full base rate.
        let lr = learning_rate(100, 1000, 100, 0.2);
        assert!((lr - 0.2).abs() < 1e-15);
        // Final step: cosine tail, far below base.
        let lr = learning_rate(1000, 1000, 100, 0.2);
        assert!(lr <= 0.2 * 1e-3, "cosine tail too high: {lr}");
        // First step: small but positive.
        let lr = learning_rate(1, 1000, 100, 0.2);
        assert!(lr > 0.0 && lr < 0.003);
    }

    #[test]
    fn schedule_is_continuous_at_the_warmup_boundary() {
        let base = 0.5;
        let before = learning_rate(99, 200, 100, base);
        let at = learning_rate(100, 200, 100, base);
        let after = learning_rate(101, 200, 100, base);
        assert!(at >= before);
        assert!(after <= at);
        assert!((at - base).abs() < 1e-15);
    }

    #[test]
    fn config_validation_rejects_nonsense() {
        let mut c = TrainConfig::default();
        c.warmup_epochs = c.epochs;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.base_lr = 0.0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.momentum = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn loss_decreases_over_training() {
        let tmp = tempfile::tempdir().unwrap();
        let manifest = tiny_corpus(100, tmp.path());
        let out = train(&manifest, &quick_cfg(), &FrameConfig::default(), None, None).unwrap();
        let first = out.log.first().unwrap().mean_loss;
        let last = out.log.last().unwrap().mean_loss;
        assert!(
            last < first,
            "training did not reduce loss: epoch1 {first} vs epoch{} {last}",
            out.log.len()
        );
        assert_eq!(out.skipped_infeasible, 0);
        assert!(out.log.iter().all(|r| r.eval_exact_match.is_some()));
    }

    #[test]
    fn training_is_bit_deterministic() {
        let tmp = tempfile::tempdir().unwrap();
        let manifest = tiny_corpus(60, tmp.path());
        let cfg = TrainConfig {
            epochs: 3,
            ..quick_cfg()
        };
        let a = train(&manifest, &cfg, &FrameConfig::default(), None, None).unwrap();
        let b = train(&manifest, &cfg, &FrameConfig::default(), None, None).unwrap();
        assert_eq!(a.params, b.params, "two identical runs diverged");
        assert_eq!(a.log, b.log);
    }

    #[test]
    fn oversampling_requires_complete_weights() {
        let tmp = tempfile::tempdir().unwrap();
        let manifest = tiny_corpus(40, tmp.path());
        let cfg = TrainConfig {
            epochs: 2,
            ..quick_cfg()
        };
        let mut weights = BTreeMap::new();
        weights.insert(0u32, 1.0);
        // Style 1 exists in the corpus but has no weight.
        let err = train(&manifest, &cfg, &FrameConfig::default(), Some(&weights), None).unwrap_err();
        assert!(err.to_string().contains("style 1"), "{err}");

        weights.insert(1u32, 3.0);
        let out = train(&manifest, &cfg, &FrameConfig::default(), Some(&weights), None);
        assert!(out.is_ok());
    }

    #[test]
    fn infeasible_samples_are_skipped_and_counted() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        std::fs::create_dir_all(dir.join("img")).unwrap();
        // 8 px wide -> T=1, but label "aa" needs 3 frames.
        let vocab = Vocabulary::new("abc").unwrap();
        let mut img = Image::zeros(16, 8);
        img.pixels[20] = 1.0;
        write_pgm(&dir.join("img/bad.pgm"), &img).unwrap();
        let wide = Image::zeros(16, 40);
        write_pgm(&dir.join("img/good.pgm"), &wide).unwrap();
        let rec = |id: &str, label: &str, path: &str| SampleRecord {
            id: id.into(),
            image_path: path.into(),
            label: label.into(),
            style_id: 0,
            noise_sigma: 0.0,
            corrupted: false,
            split: Split::Train,
            confidence: None,
        };
        let manifest = CorpusManifest::new(
            ManifestHeader::new(vocab, 16, 8, 1),
            vec![
                rec("bad", "aa", "img/bad.pgm"),
                rec("good", "ab", "img/good.pgm"),
            ],
            dir.to_path_buf(),
        );
        write_manifest(&manifest, &dir.join("manifest.jsonl")).unwrap();
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 4,
            warmup_epochs: 1,
            hidden: 8,
            seed: 1,
            ..TrainConfig::default()
        };
        let out = train(&manifest, &cfg, &FrameConfig::default(), None, None).unwrap();
        assert_eq!(out.skipped_infeasible, 1);
    }

    #[test]
    fn epoch_log_round_trips_through_csv() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("log.csv");
        let log = vec![
            EpochStats {
                epoch: 1,
                mean_loss: 2.5,
                eval_exact_match: Some(0.25),
                lr: 0.05,
            },
            EpochStats {
                epoch: 2,
                mean_loss: 1.25,
                eval_exact_match: None,
                lr: 0.1,
            },
        ];
        write_epoch_log(&path, &log).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "epoch,mean_loss,eval_exact_match,lr\n1,2.5,0.25,0.05\n2,1.25,,0.1\n"
        );
    }
}
