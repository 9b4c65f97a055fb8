//! The per-frame two-layer perceptron, its gradients, and checkpoint I/O.

use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::provenance::{Provenance, FORMAT_VERSION};
use crate::rng::stream;

use super::frames::{FrameConfig, Frames};
use super::train::TrainConfig;

/// T x (V+1) logits, row-major. Row t scores frame t over all classes,
/// blank last.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitMatrix {
    pub t: usize,
    pub classes: usize,
    pub data: Vec<f64>,
}

impl LogitMatrix {
    #[inline]
    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.classes..(t + 1) * self.classes]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Numerically stable softmax of one logit row.
pub(crate) fn softmax(row: &[f64]) -> Vec<f64> {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|&v| (v - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / z).collect()
}

/// log softmax of one logit row (logit - logsumexp).
pub(crate) fn log_softmax(row: &[f64]) -> Vec<f64> {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = row.iter().map(|&v| (v - m).exp()).sum();
    let lse = m + z.ln();
    row.iter().map(|&v| v - lse).collect()
}

/// MLP weights: logits_t = W2 * relu(W1 * x_t + b1) + b2.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub hidden: usize,
    pub input_dim: usize,
    pub n_classes: usize,
    /// hidden x input_dim, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// n_classes x hidden, row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub vocab: Vocabulary,
}

impl ModelParams {
    /// Uniform(-a, a) init with a = sqrt(6 / fan_in); biases zero.
    pub fn init(vocab: &Vocabulary, frame_cfg: &FrameConfig, hidden: usize, seed: u64) -> Self {
        let input_dim = frame_cfg.input_dim();
        let n_classes = vocab.n_classes();
        let mut w1 = vec![0.0; hidden * input_dim];
        let mut w2 = vec![0.0; n_classes * hidden];
        let a1 = (6.0 / input_dim as f64).sqrt();
        let mut rng = stream(seed, "init-w1", &[]);
        for v in &mut w1 {
            *v = (rng.gen::<f64>() * 2.0 - 1.0) * a1;
        }
        let a2 = (6.0 / hidden as f64).sqrt();
        let mut rng = stream(seed, "init-w2", &[]);
        for v in &mut w2 {
            *v = (rng.gen::<f64>() * 2.0 - 1.0) * a2;
        }
        ModelParams {
            hidden,
            input_dim,
            n_classes,
            w1,
            b1: vec![0.0; hidden],
            w2,
            b2: vec![0.0; n_classes],
            vocab: vocab.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.w1.len() != self.hidden * self.input_dim
            || self.b1.len() != self.hidden
            || self.w2.len() != self.n_classes * self.hidden
            || self.b2.len() != self.n_classes
        {
            return Err(Error::data("model parameter dimensions inconsistent"));
        }
        if self.n_classes != self.vocab.n_classes() {
            return Err(Error::data(format!(
                "model has {} classes but vocabulary implies {}",
                self.n_classes,
                self.vocab.n_classes()
            )));
        }
        let all = self
            .w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(&self.b2);
        for (i, v) in all.enumerate() {
            if !v.is_finite() {
                return Err(Error::numerical(format!(
                    "non-finite model parameter at flat index {i}"
                )));
            }
        }
        Ok(())
    }

    /// Forward pass over a frame sequence.
    pub fn forward(&self, frames: &Frames) -> Result<LogitMatrix> {
        Ok(self.forward_cached(frames)?.logits)
    }

    /// Forward pass that also keeps post-relu hidden activations (needed for
    /// backprop and for hidden-state embeddings).
    pub fn forward_cached(&self, frames: &Frames) -> Result<ForwardPass> {
        if frames.dim != self.input_dim {
            return Err(Error::data(format!(
                "frame dim {} does not match model input dim {}",
                frames.dim, self.input_dim
            )));
        }
        let t = frames.t;
        let mut hidden = vec![0.0f64; t * self.hidden];
        let mut logits = vec![0.0f64; t * self.n_classes];
        for ft in 0..t {
            let x = frames.row(ft);
            let h = &mut hidden[ft * self.hidden..(ft + 1) * self.hidden];
            for (j, hj) in h.iter_mut().enumerate() {
                let row = &self.w1[j * self.input_dim..(j + 1) * self.input_dim];
                let z: f64 = self.b1[j] + dot(row, x);
                *hj = z.max(0.0);
            }
            let out = &mut logits[ft * self.n_classes..(ft + 1) * self.n_classes];
            for (k, ok) in out.iter_mut().enumerate() {
                let row = &self.w2[k * self.hidden..(k + 1) * self.hidden];
                *ok = self.b2[k] + dot(row, h);
            }
        }
        let logits = LogitMatrix {
            t,
            classes: self.n_classes,
            data: logits,
        };
        if !logits.is_finite() {
            return Err(Error::numerical(
                "non-finite logits in forward pass (diverged parameters)",
            ));
        }
        Ok(ForwardPass {
            hidden: Frames::from_raw(t, self.hidden, hidden),
            logits,
        })
    }

    /// Backprop of a loss gradient w.r.t. logits into parameter gradients,
    /// accumulated into `grads` (callers zero or scale them).
    pub fn backward(
        &self,
        frames: &Frames,
        pass: &ForwardPass,
        grad_logits: &[f64],
        grads: &mut Gradients,
    ) {
        debug_assert_eq!(grad_logits.len(), frames.t * self.n_classes);
        for t in 0..frames.t {
            let x = frames.row(t);
            let h = pass.hidden.row(t);
            let gl = &grad_logits[t * self.n_classes..(t + 1) * self.n_classes];
            // dW2[k][j] += gl[k] * h[j]; db2[k] += gl[k]
            for (k, &g) in gl.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let row = &mut grads.w2[k * self.hidden..(k + 1) * self.hidden];
                for (j, r) in row.iter_mut().enumerate() {
                    *r += g * h[j];
                }
                grads.b2[k] += g;
            }
            // dh = W2^T gl, masked by relu' (h > 0)
            for j in 0..self.hidden {
                if h[j] <= 0.0 {
                    continue;
                }
                let mut dh = 0.0;
                for (k, &g) in gl.iter().enumerate() {
                    dh += self.w2[k * self.hidden + j] * g;
                }
                if dh == 0.0 {
                    continue;
                }
                let row = &mut grads.w1[j * self.input_dim..(j + 1) * self.input_dim];
                for (i, r) in row.iter_mut().enumerate() {
                    *r += dh * x[i];
                }
                grads.b1[j] += dh;
            }
        }
    }

    /// SGD with momentum (and optional L2 weight decay):
    /// buf = momentum*buf + (g + wd*theta); theta -= lr * buf.
    pub fn sgd_step(&mut self, grads: &Gradients, momentum_buf: &mut Gradients, cfg_lr: f64, momentum: f64, weight_decay: f64) {
        let step = |p: &mut [f64], g: &[f64], buf: &mut [f64]| {
            for i in 0..p.len() {
                let grad = g[i] + weight_decay * p[i];
                buf[i] = momentum * buf[i] + grad;
                p[i] -= cfg_lr * buf[i];
            }
        };
        step(&mut self.w1, &grads.w1, &mut momentum_buf.w1);
        step(&mut self.b1, &grads.b1, &mut momentum_buf.b1);
        step(&mut self.w2, &grads.w2, &mut momentum_buf.w2);
        step(&mut self.b2, &grads.b2, &mut momentum_buf.b2);
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Cached activations from a forward pass.
pub struct ForwardPass {
    /// Post-relu hidden activations, T x hidden.
    pub hidden: Frames,
    pub logits: LogitMatrix,
}

/// Parameter-shaped gradient (or momentum) buffers.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Gradients {
            w1: vec![0.0; params.w1.len()],
            b1: vec![0.0; params.b1.len()],
            w2: vec![0.0; params.w2.len()],
            b2: vec![0.0; params.b2.len()],
        }
    }

    pub fn clear(&mut self) {
        for v in self
            .w1
            .iter_mut()
            .chain(&mut self.b1)
            .chain(&mut self.w2)
            .chain(&mut self.b2)
        {
            *v = 0.0;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for v in self
            .w1
            .iter_mut()
            .chain(&mut self.b1)
            .chain(&mut self.w2)
            .chain(&mut self.b2)
        {
            *v *= s;
        }
    }
}

/// Sidecar JSON stored next to a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub vocab: Vocabulary,
    pub frame: FrameConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

const MAGIC: &[u8; 4] = b"CLAB";

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes the checkpoint binary (magic "CLAB", version, dims, then W1, b1,
/// W2, b2 as row-major little-endian f64) plus the JSON sidecar.
pub fn save_checkpoint(path: &Path, params: &ModelParams, meta: &CheckpointMeta) -> Result<()> {
    params.validate()?;
    if meta.vocab != params.vocab {
        return Err(Error::data("checkpoint meta vocab differs from model vocab"));
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    w.write_all(MAGIC).map_err(io)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes()).map_err(io)?;
    for dim in [params.hidden, params.input_dim, params.n_classes] {
        w.write_all(&(dim as u32).to_le_bytes()).map_err(io)?;
    }
    for arr in [&params.w1, &params.b1, &params.w2, &params.b2] {
        for v in arr.iter() {
            w.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    w.flush().map_err(io)?;

    let side = sidecar_path(path);
    let body = serde_json::to_string_pretty(meta).expect("meta serializes");
    std::fs::write(&side, body + "\n").map_err(|e| Error::io(&side, e))
}

/// Reads a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, CheckpointMeta)> {
    let side = sidecar_path(path);
    let meta_text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta: CheckpointMeta = serde_json::from_str(&meta_text)
        .map_err(|e| Error::data(format!("{}: bad sidecar: {e}", side.display())))?;

    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::data(format!("{}: {msg}", path.display()));

    if bytes.len() < 20 || &bytes[0..4] != MAGIC {
        return Err(bad("not a CLAB checkpoint"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            path: path.to_path_buf(),
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let dim_at = |off: usize| u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
    let hidden = dim_at(8);
    let input_dim = dim_at(12);
    let n_classes = dim_at(16);

    let counts = [
        hidden * input_dim,
        hidden,
        n_classes * hidden,
        n_classes,
    ];
    let total: usize = counts.iter().sum();
    if bytes.len() != 20 + total * 8 {
        return Err(bad("checkpoint size inconsistent with its dims"));
    }
    let mut off = 20;
    let mut arrays: Vec<Vec<f64>> = Vec::with_capacity(4);
    for count in counts {
        let mut arr = Vec::with_capacity(count);
        for _ in 0..count {
            arr.push(f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()));
            off += 8;
        }
        arrays.push(arr);
    }
    let b2 = arrays.pop().unwrap();
    let w2 = arrays.pop().unwrap();
    let b1 = arrays.pop().unwrap();
    let w1 = arrays.pop().unwrap();
    let params = ModelParams {
        hidden,
        input_dim,
        n_classes,
        w1,
        b1,
        w2,
        b2,
        vocab: meta.vocab.clone(),
    };
    params.validate()?;
    if params.input_dim != meta.frame.input_dim() {
        return Err(bad("frame config in sidecar does not match model input dim"));
    }
    Ok((params, meta))
}
