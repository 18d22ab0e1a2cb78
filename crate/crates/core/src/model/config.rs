use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture switches mirroring the ablation rows of the model family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    /// Replace the answer span in the passage by the mask token.
    pub mask_answer: bool,
    /// Feed the keyword-net summary of the answer into the decoder.
    pub keyword_net: bool,
    /// Initialise the decoder from the encoded answer.
    pub answer_decoder: bool,
    /// Score words against their embeddings instead of a full projection.
    pub retrieval_generator: bool,
}

impl Ablation {
    pub const FULL: Ablation = Ablation {
        mask_answer: true,
        keyword_net: true,
        answer_decoder: true,
        retrieval_generator: true,
    };

    /// Answer left in the passage.
    pub const NO_MASK: Ablation = Ablation {
        mask_answer: false,
        ..Ablation::FULL
    };

    pub const NO_KEYWORD: Ablation = Ablation {
        keyword_net: false,
        ..Ablation::FULL
    };

    /// Plain attention decoder: no answer initialisation, no keyword-net and
    /// a softmax projection output layer.
    pub const GENERIC_DECODER: Ablation = Ablation {
        mask_answer: true,
        keyword_net: false,
        answer_decoder: false,
        retrieval_generator: false,
    };
}

impl Default for Ablation {
    fn default() -> Self {
        Ablation::FULL
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub emb_dim: usize,
    /// Hidden size of each encoder direction.
    pub d_enc: usize,
    pub d_dec: usize,
    pub d_att: usize,
    /// Query size of the retrieval generator.
    pub d_q: usize,
    pub keyword_layers: usize,
    pub ablation: Ablation,
}

impl ModelConfig {
    /// Desk-scale defaults; `d_q` follows `d_dec`.
    pub fn new(vocab_size: usize, emb_dim: usize, d_enc: usize, d_dec: usize) -> Self {
        ModelConfig {
            vocab_size,
            emb_dim,
            d_enc,
            d_dec,
            d_att: d_dec,
            d_q: d_dec,
            keyword_layers: 4,
            ablation: Ablation::FULL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("vocab_size", self.vocab_size),
            ("emb_dim", self.emb_dim),
            ("d_enc", self.d_enc),
            ("d_dec", self.d_dec),
            ("d_att", self.d_att),
            ("d_q", self.d_q),
        ];
        for (name, d) in dims {
            if d == 0 {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        if self.vocab_size < crate::text::vocab::RESERVED.len() {
            return Err(Error::invalid(
                "vocabulary smaller than the reserved tokens",
            ));
        }
        Ok(())
    }

    /// Width of one bidirectional encoder state.
    pub fn enc_out(&self) -> usize {
        2 * self.d_enc
    }

    pub fn decoder_input(&self) -> usize {
        let kw = if self.ablation.keyword_net {
            self.enc_out()
        } else {
            0
        };
        self.emb_dim + self.enc_out() + kw
    }

    /// Parameters of the retrieval generator: `W_q` and the bilinear `W_a`.
    pub fn retrieval_generator_params(&self) -> usize {
        self.d_q * (self.d_dec + self.enc_out()) + self.d_q * self.emb_dim
    }

    /// Parameters of a full softmax projection from the decoder state.
    pub fn projection_params(&self) -> usize {
        self.vocab_size * self.d_dec
    }
}
