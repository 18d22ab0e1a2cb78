//! From raw triplets to id sequences.

use crate::error::Result;
use crate::model::ExampleIds;
use crate::text::{preprocess, MaskedTriplet, PreprocessOptions, Triplet, Vocab};

/// Vocabulary over masked passages, answers and questions.
pub fn build_vocab(examples: &[MaskedTriplet], cap: usize) -> Result<Vocab> {
    let seqs = examples.iter().flat_map(|m| {
        [
            &m.masked_passage[..],
            &m.answer_tokens[..],
            &m.question_tokens[..],
        ]
    });
    Vocab::build(seqs, cap)
}

pub fn encode_all(vocab: &Vocab, examples: &[MaskedTriplet]) -> Vec<ExampleIds> {
    examples
        .iter()
        .map(|m| ExampleIds::from_masked(vocab, m))
        .collect()
}

/// Preprocesses every triplet and builds a vocabulary over the result.
pub fn prepare(
    triplets: &[Triplet],
    opts: PreprocessOptions,
    cap: usize,
) -> Result<(Vocab, Vec<MaskedTriplet>, Vec<ExampleIds>)> {
    let masked = triplets
        .iter()
        .map(|t| preprocess(t, opts))
        .collect::<Result<Vec<_>>>()?;
    let vocab = build_vocab(&masked, cap)?;
    let ids = encode_all(&vocab, &masked);
    Ok((vocab, masked, ids))
}
