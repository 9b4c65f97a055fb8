//! CTC loss and gradient via the log-space forward-backward recursion, with
//! an exhaustive path-enumeration oracle for testing.
//!
//! Conventions: the blank-augmented target l' interleaves blanks around the
//! L label symbols (length 2L+1); alpha and beta both include the emission
//! probability at their own frame, so the posterior occupancy divides one
//! emission back out. The gradient with respect to logits is
//! softmax(logits) - gamma, where gamma_t,k sums occupancy over the l'
//! positions carrying class k.

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

use super::model::{log_softmax, softmax, LogitMatrix};

/// Loss and its gradient with respect to the logits (T x (V+1), row-major).
#[derive(Debug, Clone)]
pub struct CtcGrad {
    pub loss: f64,
    pub grad: Vec<f64>,
}

/// Minimum frame count able to emit `label`: L plus one extra frame per
/// adjacent repeated symbol (a blank must separate them).
pub fn min_frames(label: &[usize]) -> usize {
    let repeats = label.windows(2).filter(|w| w[0] == w[1]).count();
    label.len() + repeats
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// CTC loss for a label given as class indices. `blank` must equal the
/// vocabulary's blank index (classes run 0..=blank).
pub fn ctc_loss_indices(logits: &LogitMatrix, label: &[usize], blank: usize) -> Result<CtcGrad> {
    if label.is_empty() {
        return Err(Error::data("CTC label must be non-empty"));
    }
    if label.iter().any(|&s| s >= blank) {
        return Err(Error::data("label contains a class index at or past blank"));
    }
    if logits.classes != blank + 1 {
        return Err(Error::data(format!(
            "logits have {} classes but blank index {} implies {}",
            logits.classes,
            blank,
            blank + 1
        )));
    }
    if !logits.is_finite() {
        return Err(Error::numerical("NaN or infinity in logits"));
    }
    let t_len = logits.t;
    let needed = min_frames(label);
    if t_len < needed {
        return Err(Error::Infeasible {
            needed,
            have: t_len,
        });
    }

    // Blank-augmented target: blank, l_0, blank, l_1, ..., blank.
    let s_len = 2 * label.len() + 1;
    let aug = |s: usize| -> usize {
        if s % 2 == 0 {
            blank
        } else {
            label[s / 2]
        }
    };
    // A jump s-2 -> s skips a blank; legal only between distinct symbols.
    let can_skip = |s: usize| s >= 2 && s % 2 == 1 && aug(s) != aug(s - 2);

    let logp: Vec<Vec<f64>> = (0..t_len).map(|t| log_softmax(logits.row(t))).collect();

    let neg = f64::NEG_INFINITY;
    let mut alpha = vec![neg; t_len * s_len];
    alpha[0] = logp[0][aug(0)];
    if s_len > 1 {
        alpha[1] = logp[0][aug(1)];
    }
    for t in 1..t_len {
        for s in 0..s_len {
            let mut a = alpha[(t - 1) * s_len + s];
            if s >= 1 {
                a = log_add(a, alpha[(t - 1) * s_len + s - 1]);
            }
            if can_skip(s) {
                a = log_add(a, alpha[(t - 1) * s_len + s - 2]);
            }
            alpha[t * s_len + s] = if a == neg { neg } else { a + logp[t][aug(s)] };
        }
    }

    let mut beta = vec![neg; t_len * s_len];
    beta[(t_len - 1) * s_len + s_len - 1] = logp[t_len - 1][aug(s_len - 1)];
    if s_len > 1 {
        beta[(t_len - 1) * s_len + s_len - 2] = logp[t_len - 1][aug(s_len - 2)];
    }
    for t in (0..t_len - 1).rev() {
        for s in 0..s_len {
            let mut b = beta[(t + 1) * s_len + s];
            if s + 1 < s_len {
                b = log_add(b, beta[(t + 1) * s_len + s + 1]);
            }
            if s + 2 < s_len && can_skip(s + 2) {
                b = log_add(b, beta[(t + 1) * s_len + s + 2]);
            }
            beta[t * s_len + s] = if b == neg { neg } else { b + logp[t][aug(s)] };
        }
    }

    let mut log_p_total = alpha[(t_len - 1) * s_len + s_len - 1];
    if s_len > 1 {
        log_p_total = log_add(log_p_total, alpha[(t_len - 1) * s_len + s_len - 2]);
    }
    if log_p_total == neg {
        // Unreachable for feasible labels with finite logits, but better a
        // defined error than silent infinities.
        return Err(Error::numerical("CTC: label probability underflowed to zero"));
    }

    // gamma_t,k = sum over positions s with aug(s)=k of
    //   exp(alpha + beta - log y_t(aug(s)) - logP);
    // gradient = softmax - gamma.
    let mut grad = vec![0.0f64; t_len * logits.classes];
    for t in 0..t_len {
        let y = softmax(logits.row(t));
        let row = &mut grad[t * logits.classes..(t + 1) * logits.classes];
        row.copy_from_slice(&y);
        for s in 0..s_len {
            let a = alpha[t * s_len + s];
            let b = beta[t * s_len + s];
            if a == neg || b == neg {
                continue;
            }
            let occupancy = (a + b - logp[t][aug(s)] - log_p_total).exp();
            row[aug(s)] -= occupancy;
        }
    }

    Ok(CtcGrad {
        loss: (-log_p_total).max(0.0),
        grad,
    })
}

/// CTC loss for a string label.
pub fn ctc_loss(logits: &LogitMatrix, label: &str, vocab: &Vocabulary) -> Result<CtcGrad> {
    let indices = vocab.encode(label)?;
    ctc_loss_indices(logits, &indices, vocab.blank_index())
}

/// Oracle: enumerates every (V+1)^T frame path, collapses it (merge repeats,
/// then drop blanks), and sums the probability of paths matching `label`.
/// Guarded to T <= 8, V <= 4; test use only.
pub fn ctc_loss_bruteforce(logits: &LogitMatrix, label: &str, vocab: &Vocabulary) -> Result<f64> {
    let t_len = logits.t;
    let v = vocab.len();
    if t_len > 8 || v > 4 {
        return Err(Error::data(format!(
            "brute-force guard: T={t_len} (max 8), V={v} (max 4)"
        )));
    }
    let target = vocab.encode(label)?;
    let blank = vocab.blank_index();
    let probs: Vec<Vec<f64>> = (0..t_len).map(|t| softmax(logits.row(t))).collect();

    let classes = v + 1;
    let mut path = vec![0usize; t_len];
    let mut total = 0.0f64;
    loop {
        let mut p = 1.0;
        for (t, &c) in path.iter().enumerate() {
            p *= probs[t][c];
        }
        // Collapse: merge consecutive repeats, then drop blanks.
        let mut collapsed: Vec<usize> = Vec::with_capacity(t_len);
        let mut prev = usize::MAX;
        for &c in &path {
            if c != prev {
                if c != blank {
                    collapsed.push(c);
                }
                prev = c;
            }
        }
        if collapsed == target {
            total += p;
        }
        // Odometer increment over base (V+1).
        let mut t = 0;
        loop {
            if t == t_len {
                if total <= 0.0 {
                    return Err(Error::Infeasible {
                        needed: min_frames(&target),
                        have: t_len,
                    });
                }
                return Ok(-total.ln());
            }
            path[t] += 1;
            if path[t] < classes {
                break;
            }
            path[t] = 0;
            t += 1;
        }
    }
}
