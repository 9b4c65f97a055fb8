//! Built-in oracle suite. Re-derives the crate's numerical core the slow,
//! obviously-correct way and compares: CTC loss against path enumeration,
//! the edit-distance DP against exhaustive recursion, and both gradient
//! paths against finite differences. Runs in a few seconds and exits
//! nonzero on the first mismatch, so it doubles as an install check.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Image, Vocabulary};
use crate::error::{Error, Result};
use crate::metrics::{edit_distance, edit_distance_exhaustive};
use crate::recognizer::{
    ctc_loss, ctc_loss_bruteforce, extract_frames, FrameConfig, Gradients, LogitMatrix,
    ModelParams,
};
use crate::rng::stream;

const SEED: u64 = 20_240_501;
const FD_STEP: f64 = 1e-5;

pub(super) fn run_all() -> Result<()> {
    ctc_forward_oracle()?;
    edit_distance_oracle()?;
    ctc_gradient_oracle()?;
    model_gradient_oracle()?;
    println!("selftest: all checks passed");
    Ok(())
}

fn random_instance(
    rng: &mut ChaCha8Rng,
    symbols: &str,
) -> Result<(LogitMatrix, String, Vocabulary)> {
    let vocab = Vocabulary::new(symbols)?;
    let t = rng.gen_range(4..=6);
    let classes = vocab.n_classes();
    let data: Vec<f64> = (0..t * classes).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let len = rng.gen_range(1..=2);
    let label: String = (0..len)
        .map(|_| {
            let i = rng.gen_range(0..vocab.len());
            vocab.symbol(i).expect("index in range")
        })
        .collect();
    Ok((LogitMatrix { t, classes, data }, label, vocab))
}

/// Dynamic-programming CTC loss vs. summing over every alignment path.
fn ctc_forward_oracle() -> Result<()> {
    let mut rng = stream(SEED, "selftest-ctc", &[]);
    let mut max_diff: f64 = 0.0;
    for i in 0..400u32 {
        let symbols = if i % 2 == 0 { "ab" } else { "abc" };
        let (lm, label, vocab) = random_instance(&mut rng, symbols)?;
        let fast = ctc_loss(&lm, &label, &vocab)?.loss;
        let brute = ctc_loss_bruteforce(&lm, &label, &vocab)?;
        let diff = (fast - brute).abs();
        max_diff = max_diff.max(diff);
        if diff > 1e-9 {
            return Err(Error::numerical(format!(
                "ctc forward mismatch on instance {i} (label {label:?}): {fast} vs {brute}"
            )));
        }
    }
    println!("selftest: ctc loss matches path enumeration on 400 instances (max diff {max_diff:.2e})");
    Ok(())
}

/// The production DP vs. exhaustive recursion, every short pair plus a
/// random sample of longer ones.
fn edit_distance_oracle() -> Result<()> {
    let mut universe = vec![String::new()];
    for len in 1..=3 {
        let mut next = Vec::new();
        for s in universe.iter().filter(|s| s.len() == len - 1) {
            for c in ['a', 'b'] {
                next.push(format!("{s}{c}"));
            }
        }
        universe.extend(next);
    }
    let mut checked = 0usize;
    for a in &universe {
        for b in &universe {
            if edit_distance(a, b) != edit_distance_exhaustive(a, b) {
                return Err(Error::numerical(format!(
                    "edit distance mismatch on ({a:?}, {b:?})"
                )));
            }
            checked += 1;
        }
    }
    let mut rng = stream(SEED, "selftest-edit", &[]);
    for _ in 0..200 {
        let mut pick = || -> String {
            let len = rng.gen_range(0..=4);
            (0..len)
                .map(|_| ['a', 'b', 'c'][rng.gen_range(0..3)])
                .collect()
        };
        let (a, b) = (pick(), pick());
        if edit_distance(&a, &b) != edit_distance_exhaustive(&a, &b) {
            return Err(Error::numerical(format!(
                "edit distance mismatch on ({a:?}, {b:?})"
            )));
        }
        checked += 1;
    }
    println!("selftest: edit distance matches the exhaustive oracle on {checked} pairs");
    Ok(())
}

/// Analytic CTC gradient (softmax minus occupancy) vs. central differences
/// on the raw logits.
fn ctc_gradient_oracle() -> Result<()> {
    let mut rng = stream(SEED, "selftest-ctc-grad", &[]);
    let mut max_err: f64 = 0.0;
    for i in 0..12u32 {
        let (lm, label, vocab) = random_instance(&mut rng, "ab")?;
        let analytic = ctc_loss(&lm, &label, &vocab)?.grad;
        for j in 0..lm.data.len() {
            let mut plus = lm.clone();
            plus.data[j] += FD_STEP;
            let mut minus = lm.clone();
            minus.data[j] -= FD_STEP;
            let fd = (ctc_loss(&plus, &label, &vocab)?.loss
                - ctc_loss(&minus, &label, &vocab)?.loss)
                / (2.0 * FD_STEP);
            let err = (fd - analytic[j]).abs();
            max_err = max_err.max(err);
            if err > 1e-6 * (1.0 + fd.abs()) {
                return Err(Error::numerical(format!(
                    "ctc gradient mismatch on instance {i} coordinate {j}: \
                     analytic {} vs finite difference {fd}",
                    analytic[j]
                )));
            }
        }
    }
    println!("selftest: ctc gradient matches finite differences on 12 instances (max err {max_err:.2e})");
    Ok(())
}

/// End-to-end parameter gradients (backprop through the MLP and CTC) vs.
/// central differences on a sample of coordinates in every tensor.
fn model_gradient_oracle() -> Result<()> {
    let vocab = Vocabulary::new("ab")?;
    let frame = FrameConfig::default();
    let mut rng = stream(SEED, "selftest-model-grad", &[]);
    let mut image = Image::zeros(frame.cell_height, 4 * frame.window_width);
    for p in image.pixels.iter_mut() {
        *p = rng.gen_range(0.0..1.0);
    }
    let frames = extract_frames(&image, &frame)?;
    let params = ModelParams::init(&vocab, &frame, 8, SEED);
    let label = "ab";

    let pass = params.forward_cached(&frames)?;
    let grad_logits = ctc_loss(&pass.logits, label, &vocab)?.grad;
    let mut grads = Gradients::zeros_like(&params);
    params.backward(&frames, &pass, &grad_logits, &mut grads);

    let loss_at = |p: &ModelParams| -> Result<f64> {
        Ok(ctc_loss(&p.forward(&frames)?, label, &vocab)?.loss)
    };

    // Every bias plus a stride through each weight matrix.
    let mut coords: Vec<(usize, usize)> = Vec::new();
    coords.extend((0..params.w1.len()).step_by(97).map(|i| (0, i)));
    coords.extend((0..params.b1.len()).map(|i| (1, i)));
    coords.extend((0..params.w2.len()).step_by(3).map(|i| (2, i)));
    coords.extend((0..params.b2.len()).map(|i| (3, i)));

    let mut max_err: f64 = 0.0;
    for (tensor, i) in coords {
        let analytic = match tensor {
            0 => grads.w1[i],
            1 => grads.b1[i],
            2 => grads.w2[i],
            _ => grads.b2[i],
        };
        let bump = |delta: f64| -> Result<f64> {
            let mut p = params.clone();
            match tensor {
                0 => p.w1[i] += delta,
                1 => p.b1[i] += delta,
                2 => p.w2[i] += delta,
                _ => p.b2[i] += delta,
            }
            loss_at(&p)
        };
        let fd = (bump(FD_STEP)? - bump(-FD_STEP)?) / (2.0 * FD_STEP);
        let err = (fd - analytic).abs();
        max_err = max_err.max(err);
        if err > 1e-5 * (1.0 + fd.abs()) {
            return Err(Error::numerical(format!(
                "model gradient mismatch in tensor {tensor} coordinate {i}: \
                 analytic {analytic} vs finite difference {fd}"
            )));
        }
    }
    println!("selftest: model gradients match finite differences (max err {max_err:.2e})");
    Ok(())
}
