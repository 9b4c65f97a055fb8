//! A minimal trainable CTC sequence recognizer.
//!
//! The model is deliberately small: sliding-window frames over the line
//! image, one two-layer perceptron applied per frame, CTC loss over the
//! frame logits. Gradients are hand-derived (softmax minus CTC posterior,
//! then plain backprop through the MLP) and checked against finite
//! differences, so there is no autodiff framework anywhere in the crate.

mod ctc;
mod decode;
mod embed;
mod frames;
mod model;
pub(crate) mod par;
mod score;
mod train;

pub use ctc::{ctc_loss, ctc_loss_bruteforce, ctc_loss_indices, min_frames, CtcGrad};
pub use decode::{confidence, greedy_decode, ConfidenceScore};
pub use embed::{embed_dataset, read_embeddings, write_embeddings, EmbedKind, Embeddings};
pub use frames::{extract_frames, FrameConfig, Frames};
pub use model::{
    load_checkpoint, save_checkpoint, CheckpointMeta, Gradients, LogitMatrix, ModelParams,
};
pub use score::{predict_dataset, score_dataset, write_scores_csv};
pub use train::{learning_rate, train, write_epoch_log, EpochStats, TrainConfig, TrainOutcome};
