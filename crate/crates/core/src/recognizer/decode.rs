//! Greedy (best-path) decoding and the confidence score used to rank
//! training candidates by difficulty.

use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;

use super::model::{softmax, LogitMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceScore {
    /// Mean per-character probability; for empty decodes, mean frame blank
    /// probability. Always in [0, 1].
    pub value: f64,
    pub decoded: String,
    pub per_char_probs: Vec<f64>,
}

/// Best-path decode: per-frame argmax, collapse consecutive repeats, drop
/// blanks. Returns the decoded string and, per emitted character, the
/// maximum softmax probability among the frames of its pre-collapse run.
pub fn greedy_decode(logits: &LogitMatrix, vocab: &Vocabulary) -> (String, Vec<f64>) {
    let blank = vocab.blank_index();
    let mut decoded = String::new();
    let mut probs: Vec<f64> = Vec::new();
    let mut prev_class = usize::MAX;
    for t in 0..logits.t {
        let y = softmax(logits.row(t));
        let (argmax, &p) = y
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.total_cmp(b))
            .expect("logit rows are non-empty");
        if argmax == prev_class {
            // Same run: the run's character keeps its best frame probability.
            if argmax != blank {
                let last = probs.last_mut().expect("run already emitted");
                if p > *last {
                    *last = p;
                }
            }
        } else {
            if argmax != blank {
                decoded.push(vocab.symbol(argmax).expect("argmax below blank"));
                probs.push(p);
            }
            prev_class = argmax;
        }
    }
    (decoded, probs)
}

/// Confidence of the greedy decode. Empty decodes take the mean frame blank
/// probability instead, which keeps degenerate samples comparable (low) and
/// the value always defined in [0, 1].
pub fn confidence(logits: &LogitMatrix, vocab: &Vocabulary) -> ConfidenceScore {
    let (decoded, per_char_probs) = greedy_decode(logits, vocab);
    let value = if per_char_probs.is_empty() {
        let blank = vocab.blank_index();
        let mut sum = 0.0;
        for t in 0..logits.t {
            sum += softmax(logits.row(t))[blank];
        }
        if logits.t == 0 {
            0.0
        } else {
            sum / logits.t as f64
        }
    } else {
        per_char_probs.iter().sum::<f64>() / per_char_probs.len() as f64
    };
    ConfidenceScore {
        value: value.clamp(0.0, 1.0),
        decoded,
        per_char_probs,
    }
}
