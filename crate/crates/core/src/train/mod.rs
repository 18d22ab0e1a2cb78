//! Maximum-likelihood training, checkpoints and configuration.

mod checkpoint;
mod config;
mod dataset;
mod loss;
mod trainer;

pub use checkpoint::{Checkpoint, MAGIC};
pub use config::{hex_digest, TrainConfig};
pub use dataset::{build_vocab, encode_all, prepare};
pub use loss::{nll_loss, nll_value, record_loss, Batch, LossAndGrads};
pub use trainer::{filter_lengths, train, CheckpointKind, LossRecord, TrainOutcome};
