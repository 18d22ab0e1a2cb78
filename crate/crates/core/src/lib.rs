//! Answer-separated sequence-to-sequence question generation.
//!
//! The answer span is masked out of the passage, passage and answer are
//! encoded by separate bidirectional LSTMs, and an attention decoder reads
//! the answer through a stack of parameter-free attention layers
//! (keyword-net) before scoring words against their embeddings.

pub mod autodiff;
pub mod error;
pub mod eval;
pub mod inference;
pub mod model;
pub mod synth;
pub mod text;
pub mod train;

pub use error::{Error, Result};
