//! Input preprocessing: answer masking, entity replacement, vocabulary and
//! pre-trained embeddings.

mod embeddings;
mod ner;
mod triplet;
pub mod vocab;

pub use embeddings::{load_embeddings, read_embeddings, Embeddings, GLOVE_DIM};
pub use ner::{ner_replace, restore_entities, MatchingTable, OUTSIDE};
pub use triplet::{
    mask_answer, preprocess, read_masked, read_triplets, write_jsonl, MaskedTriplet,
    PreprocessOptions, Triplet,
};
pub use vocab::Vocab;

pub(crate) use triplet::read_jsonl;
