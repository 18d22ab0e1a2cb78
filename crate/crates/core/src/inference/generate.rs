//! Decoding a trained model: the step adapter, attention traces and
//! entity restoration.

use std::io::{BufRead, Write};
use std::rc::Rc;

use log::warn;
use serde::{Deserialize, Serialize};

use super::beam::{beam_search, greedy, DecodeConfig, Specials, StepModel};
use crate::autodiff::{log_softmax_values, Tape, Var};
use crate::error::{Error, Result};
use crate::model::{
    condition, output_mask, start_state, step, Conditioning, DecoderState, Dropout, Model, Weights,
};
use crate::text::vocab::{EOS, MASK, PAD, SOS};
use crate::text::{restore_entities, MatchingTable};

/// Attention rows recorded so far, newest first. Shared between beams.
#[derive(Debug)]
struct TraceLink {
    row: Vec<f64>,
    prev: Option<Rc<TraceLink>>,
}

#[derive(Clone, Debug)]
pub struct StepperState {
    dec: DecoderState,
    trace: Option<Rc<TraceLink>>,
}

impl StepperState {
    /// Attention rows in generation order.
    fn trace(&self) -> Vec<Vec<f64>> {
        let mut rows = Vec::new();
        let mut cur = self.trace.clone();
        while let Some(link) = cur {
            rows.push(link.row.clone());
            cur = link.prev.clone();
        }
        rows.reverse();
        rows
    }
}

/// Runs a [`Model`] one token at a time for a single passage/answer pair.
pub struct ModelStepper<'m> {
    model: &'m Model,
    tape: Tape,
    w: Weights<Var>,
    cond: Conditioning,
    mask: Vec<bool>,
    drop: Dropout,
}

impl<'m> ModelStepper<'m> {
    pub fn new(model: &'m Model, passage: &[usize], answer: &[usize]) -> Result<Self> {
        let mut tape = Tape::new();
        let w = model.weights.bind(&mut tape);
        let mut drop = Dropout::eval();
        let cond = condition(&mut tape, &w, passage, answer, &mut drop)?;
        Ok(ModelStepper {
            model,
            tape,
            w,
            cond,
            mask: output_mask(model.config.vocab_size),
            drop,
        })
    }
}

impl StepModel for ModelStepper<'_> {
    type State = StepperState;

    fn vocab_size(&self) -> usize {
        self.model.config.vocab_size
    }

    fn start(&mut self) -> Result<StepperState> {
        let dec = start_state(&mut self.tape, &self.w, &self.model.config, &self.cond)?;
        Ok(StepperState { dec, trace: None })
    }

    fn step(&mut self, state: &StepperState, prev: usize) -> Result<(Vec<f64>, StepperState)> {
        let out = step(
            &mut self.tape,
            &self.w,
            &self.model.config,
            &self.cond,
            state.dec,
            prev,
            &mut self.drop,
        )?;
        let lp = log_softmax_values(self.tape.value(out.scores).data(), Some(&self.mask))?;
        let link = TraceLink {
            row: self.tape.value(out.alpha).data().to_vec(),
            prev: state.trace.clone(),
        };
        Ok((
            lp,
            StepperState {
                dec: out.state,
                trace: Some(Rc::new(link)),
            },
        ))
    }
}

/// Specials used for every model decode: PAD and the answer mask token are
/// never emitted.
pub fn model_specials() -> Specials {
    Specials {
        sos: SOS,
        eos: EOS,
        banned: vec![PAD, MASK],
    }
}

/// One decoded question.
#[derive(Clone, Debug, PartialEq)]
pub struct Generation {
    /// Token ids without EOS.
    pub tokens: Vec<usize>,
    pub log_prob: f64,
    /// Length-normalised ranking score.
    pub score: f64,
    pub finished: bool,
    /// `attention[t]` is the passage distribution used to emit `tokens[t]`.
    pub attention: Vec<Vec<f64>>,
}

fn finish(
    tokens: Vec<usize>,
    finished: bool,
    log_prob: f64,
    score: f64,
    state: &StepperState,
) -> Generation {
    let mut attention = state.trace();
    attention.truncate(tokens.len());
    Generation {
        tokens,
        log_prob,
        score,
        finished,
        attention,
    }
}

/// Beam search decode of one example.
pub fn generate(
    model: &Model,
    passage: &[usize],
    answer: &[usize],
    cfg: &DecodeConfig,
) -> Result<Generation> {
    let mut stepper = ModelStepper::new(model, passage, answer)?;
    let r = beam_search(&mut stepper, cfg, &model_specials())?;
    let tokens = r.best.output().to_vec();
    Ok(finish(
        tokens,
        r.best.finished,
        r.best.log_prob,
        r.score,
        &r.best.state,
    ))
}

/// Argmax decode of one example.
pub fn generate_greedy(
    model: &Model,
    passage: &[usize],
    answer: &[usize],
    max_len: usize,
) -> Result<Generation> {
    let mut stepper = ModelStepper::new(model, passage, answer)?;
    let h = greedy(&mut stepper, max_len, &model_specials())?;
    let tokens = h.output().to_vec();
    let score = h.log_prob;
    Ok(finish(tokens, h.finished, h.log_prob, score, &h.state))
}

/// Restores entity placeholders. Unknown placeholders stay as they are and
/// are logged.
pub fn postprocess(tokens: &[String], table: &MatchingTable) -> Vec<String> {
    let (out, unknown) = restore_entities(tokens, table);
    if unknown > 0 {
        warn!("{unknown} placeholder(s) without a matching-table entry left in place");
    }
    out
}

/// Row-major `T × n` attention matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionTrace {
    pub dims: [usize; 2],
    pub values: Vec<f64>,
}

impl AttentionTrace {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("ragged attention rows"));
        }
        Ok(AttentionTrace {
            dims: [rows.len(), n],
            values: rows.concat(),
        })
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.dims[1]..(t + 1) * self.dims[1]]
    }
}

/// One line of generation output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratedQuestion {
    pub question_tokens: Vec<String>,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attention: Option<AttentionTrace>,
}

pub fn write_generations<W: Write>(w: W, items: &[GeneratedQuestion]) -> Result<()> {
    crate::text::write_jsonl(w, items)
}

pub fn read_generations<R: BufRead>(r: R) -> Result<Vec<GeneratedQuestion>> {
    crate::text::read_jsonl(r, |_: &GeneratedQuestion| Ok(()))
}
