//! The answer-separated encoder-decoder.

mod config;
pub mod decoder;
pub mod encoder;
mod weights;

pub use config::{Ablation, ModelConfig};
pub use decoder::{
    attend, base_generate, decode_step, generate_distribution, init_state, keyword_net,
    output_mask, output_scores, AttentionMemory, DecoderState,
};
pub use encoder::{
    encode_answer, encode_passage, lstm_step, run_lstm, EncodedAnswer, EncodedPassage,
};
pub use weights::{AttentionWeights, GeneratorWeights, LstmWeights, Weights};

use rand::Rng;

use crate::autodiff::{dropout, SeedRng, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::text::vocab::{EOS, SOS};
use crate::text::{Embeddings, MaskedTriplet, Vocab};

/// Dropout switch threaded through a forward pass.
#[derive(Debug)]
pub struct Dropout {
    p: f64,
    rng: Option<SeedRng>,
}

impl Dropout {
    /// Identity everywhere.
    pub fn eval() -> Self {
        Dropout { p: 0.0, rng: None }
    }

    pub fn train(p: f64, rng: SeedRng) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::invalid(format!(
                "dropout probability {p} outside [0, 1)"
            )));
        }
        Ok(Dropout { p, rng: Some(rng) })
    }

    pub fn is_training(&self) -> bool {
        self.rng.is_some()
    }

    pub fn apply(&mut self, tape: &mut Tape, x: Var) -> Result<Var> {
        match self.rng.as_mut() {
            Some(rng) => dropout(tape, x, self.p, true, rng),
            None => Ok(x),
        }
    }
}

/// Model weights plus the rows of the embedding that stay fixed.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub weights: Weights<Tensor>,
    /// `true` for embedding rows copied from pre-trained vectors.
    pub frozen_rows: Vec<bool>,
}

impl Model {
    pub fn new<R: Rng + ?Sized>(
        config: ModelConfig,
        embeddings: Embeddings,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        if embeddings.matrix.shape() != [config.vocab_size, config.emb_dim] {
            return Err(Error::shape(
                "embeddings",
                embeddings.matrix.shape(),
                &[config.vocab_size, config.emb_dim],
            ));
        }
        let weights = Weights::init(&config, embeddings.matrix, rng);
        Ok(Model {
            config,
            weights,
            frozen_rows: embeddings.frozen,
        })
    }

    /// Model with random trainable embeddings.
    pub fn random<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        let emb = Embeddings::random(config.vocab_size, config.emb_dim, rng);
        Model::new(config, emb, rng)
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.parameter_count()
    }
}

/// Token ids of one preprocessed example.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExampleIds {
    pub passage: Vec<usize>,
    pub answer: Vec<usize>,
    /// Gold question without SOS/EOS.
    pub question: Vec<usize>,
}

impl ExampleIds {
    pub fn from_masked(vocab: &Vocab, m: &MaskedTriplet) -> Self {
        ExampleIds {
            passage: vocab.encode(&m.masked_passage),
            answer: vocab.encode(&m.answer_tokens),
            question: vocab.encode(&m.question_tokens),
        }
    }

    /// Decoder targets: the question followed by EOS.
    pub fn targets(&self) -> Vec<usize> {
        let mut t = self.question.clone();
        t.push(EOS);
        t
    }
}

/// Encoder outputs that condition every decoding step.
#[derive(Clone, Debug)]
pub struct Conditioning {
    pub passage: EncodedPassage,
    pub answer: EncodedAnswer,
    pub memory: AttentionMemory,
}

/// Result of one decoding step.
#[derive(Clone, Debug)]
pub struct StepOutput {
    pub state: DecoderState,
    pub alpha: Var,
    pub context: Var,
    /// Unnormalised word scores.
    pub scores: Var,
}

pub fn condition(
    tape: &mut Tape,
    w: &Weights<Var>,
    passage: &[usize],
    answer: &[usize],
    drop: &mut Dropout,
) -> Result<Conditioning> {
    let passage = encode_passage(tape, w, passage, drop)?;
    let answer = encode_answer(tape, w, answer, drop)?;
    let memory = AttentionMemory::new(tape, w, &passage, None)?;
    Ok(Conditioning {
        passage,
        answer,
        memory,
    })
}

pub fn start_state(
    tape: &mut Tape,
    w: &Weights<Var>,
    cfg: &ModelConfig,
    cond: &Conditioning,
) -> Result<DecoderState> {
    init_state(tape, w, cfg, Some(&cond.answer))
}

/// Attention from the previous state, optional keyword-net, LSTM update and
/// output scores.
pub fn step(
    tape: &mut Tape,
    w: &Weights<Var>,
    cfg: &ModelConfig,
    cond: &Conditioning,
    state: DecoderState,
    y_prev: usize,
    drop: &mut Dropout,
) -> Result<StepOutput> {
    let (alpha, context) = attend(tape, w, &cond.memory, state.h, &cond.passage)?;
    let context = drop.apply(tape, context)?;
    let keyword = if cfg.ablation.keyword_net {
        Some(keyword_net(tape, context, &cond.answer, cfg.keyword_layers)?.0)
    } else {
        None
    };
    let state = decode_step(tape, w, y_prev, state, context, keyword, drop)?;
    let scores = output_scores(tape, w, state.h, context)?;
    Ok(StepOutput {
        state,
        alpha,
        context,
        scores,
    })
}

/// Teacher-forced negative log-likelihood of each target token (question
/// then EOS) for one example.
pub fn token_nlls(
    tape: &mut Tape,
    w: &Weights<Var>,
    cfg: &ModelConfig,
    ex: &ExampleIds,
    drop: &mut Dropout,
) -> Result<Vec<Var>> {
    let cond = condition(tape, w, &ex.passage, &ex.answer, drop)?;
    let mut state = start_state(tape, w, cfg, &cond)?;
    let mask = output_mask(cfg.vocab_size);
    let mut y_prev = SOS;
    let mut out = Vec::new();
    for &y in &ex.targets() {
        let so = step(tape, w, cfg, &cond, state, y_prev, drop)?;
        let lp = tape.log_softmax(so.scores, Some(&mask))?;
        let picked = tape.pick(lp, y)?;
        out.push(tape.scale(picked, -1.0));
        state = so.state;
        y_prev = y;
    }
    Ok(out)
}
