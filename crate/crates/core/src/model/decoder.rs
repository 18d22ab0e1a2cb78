//! Answer-separated decoder: passage attention, keyword-net over the answer,
//! the LSTM state update and the two output layers.

use super::config::ModelConfig;
use super::encoder::{lstm_step, EncodedAnswer, EncodedPassage};
use super::weights::Weights;
use super::Dropout;
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::text::vocab::PAD;

/// Hidden and cell vector of the decoder LSTM.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecoderState {
    pub h: Var,
    pub c: Var,
}

/// Passage-side quantities that do not change across decoding steps.
#[derive(Clone, Debug)]
pub struct AttentionMemory {
    /// Weight-normalised `W_c`.
    pub w_c: Var,
    /// `H · U_cᵀ`, one row per passage position.
    pub projected: Var,
    /// `false` marks padded positions.
    pub mask: Option<Vec<bool>>,
}

impl AttentionMemory {
    pub fn new(
        tape: &mut Tape,
        w: &Weights<Var>,
        enc: &EncodedPassage,
        mask: Option<Vec<bool>>,
    ) -> Result<Self> {
        if let Some(m) = &mask {
            if m.len() != enc.len() {
                return Err(Error::shape("attention mask", &[enc.len()], &[m.len()]));
            }
        }
        let a = &w.attention;
        let w_c = tape.weight_norm(a.w_dir, a.w_gain)?;
        let u_c = tape.weight_norm(a.u_dir, a.u_gain)?;
        let projected = tape.matmul_nt(enc.matrix, u_c)?;
        Ok(AttentionMemory {
            w_c,
            projected,
            mask,
        })
    }
}

/// `e_i = vᵀ tanh(W_c s + U_c h_i)`, `α = softmax(e)`, `c = Σ α_i h_i`.
/// Returns `(α, c)`.
pub fn attend(
    tape: &mut Tape,
    w: &Weights<Var>,
    mem: &AttentionMemory,
    s_prev: Var,
    enc: &EncodedPassage,
) -> Result<(Var, Var)> {
    let ws = tape.matvec(mem.w_c, s_prev)?;
    let pre = tape.add_row(mem.projected, ws)?;
    let act = tape.tanh(pre);
    let scores = tape.matvec(act, w.attention.v)?;
    let alpha = tape.softmax(scores, mem.mask.as_deref())?;
    let context = tape.vecmat(alpha, enc.matrix)?;
    Ok((alpha, context))
}

/// Keyword-net: starting from `o⁰ = context`, each layer attends over the
/// answer states with plain dot products and returns their weighted mean.
/// Returns `o^L` and every layer's weights. `layers == 0` returns the
/// context unchanged.
pub fn keyword_net(
    tape: &mut Tape,
    context: Var,
    answer: &EncodedAnswer,
    layers: usize,
) -> Result<(Var, Vec<Var>)> {
    let width = tape.value(answer.matrix).shape()[1];
    if tape.value(context).len() != width {
        return Err(Error::shape(
            "keyword_net",
            tape.value(context).shape(),
            tape.value(answer.matrix).shape(),
        ));
    }
    let mut o = context;
    let mut weights = Vec::with_capacity(layers);
    for _ in 0..layers {
        let scores = tape.matvec(answer.matrix, o)?;
        let p = tape.softmax(scores, None)?;
        o = tape.vecmat(p, answer.matrix)?;
        weights.push(p);
    }
    Ok((o, weights))
}

/// Decoder state before the first step: `tanh(W_init · h_final)` when the
/// answer-separated initialisation is on, zeros otherwise. The cell starts
/// at zero.
pub fn init_state(
    tape: &mut Tape,
    w: &Weights<Var>,
    cfg: &ModelConfig,
    answer: Option<&EncodedAnswer>,
) -> Result<DecoderState> {
    let c = tape.constant(Tensor::zeros(&[cfg.d_dec]));
    let h = match (w.init, answer) {
        (Some(w_init), Some(a)) if cfg.ablation.answer_decoder => {
            let z = tape.matvec(w_init, a.final_state)?;
            tape.tanh(z)
        }
        _ => tape.constant(Tensor::zeros(&[cfg.d_dec])),
    };
    Ok(DecoderState { h, c })
}

/// One decoder LSTM update fed with `[emb(y_prev); c_t; o_L]`, or
/// `[emb(y_prev); c_t]` when `keyword` is `None`.
pub fn decode_step(
    tape: &mut Tape,
    w: &Weights<Var>,
    y_prev: usize,
    state: DecoderState,
    context: Var,
    keyword: Option<Var>,
    drop: &mut Dropout,
) -> Result<DecoderState> {
    let vocab = tape.value(w.embedding).shape()[0];
    if y_prev >= vocab {
        return Err(Error::UnknownToken(y_prev));
    }
    let e = tape.row(w.embedding, y_prev)?;
    let e = drop.apply(tape, e)?;
    let input = match keyword {
        Some(o) => tape.concat(&[e, context, o])?,
        None => tape.concat(&[e, context])?,
    };
    let (h, c) = lstm_step(tape, &w.decoder, input, state.h, state.c)?;
    Ok(DecoderState { h, c })
}

/// Unnormalised word scores. The retrieval layer computes
/// `q = tanh(W_q [s; c])` and scores each word as `qᵀ W_a e_k`; the
/// projection layer is `W_o s`.
pub fn output_scores(tape: &mut Tape, w: &Weights<Var>, s: Var, context: Var) -> Result<Var> {
    if let Some(g) = &w.generator {
        let sc = tape.concat(&[s, context])?;
        let q = tape.matvec(g.w_q, sc)?;
        let q = tape.tanh(q);
        let qa = tape.vecmat(q, g.w_a)?;
        tape.matvec(w.embedding, qa)
    } else if let Some(w_o) = w.output {
        tape.matvec(w_o, s)
    } else {
        Err(Error::invalid("model has no output layer"))
    }
}

/// Vocabulary mask that removes PAD from the output distribution.
pub fn output_mask(vocab_size: usize) -> Vec<bool> {
    let mut m = vec![true; vocab_size];
    m[PAD] = false;
    m
}

/// Probability over the vocabulary from the retrieval generator (PAD gets 0).
pub fn generate_distribution(
    tape: &mut Tape,
    w: &Weights<Var>,
    s: Var,
    context: Var,
) -> Result<Var> {
    if w.generator.is_none() {
        return Err(Error::invalid("retrieval generator disabled"));
    }
    let scores = output_scores(tape, w, s, context)?;
    let mask = output_mask(tape.value(scores).len());
    tape.softmax(scores, Some(&mask))
}

/// Probability over the vocabulary from `softmax(W_o s)`.
pub fn base_generate(tape: &mut Tape, w: &Weights<Var>, s: Var) -> Result<Var> {
    let w_o = w
        .output
        .ok_or_else(|| Error::invalid("projection output layer disabled"))?;
    let scores = tape.matvec(w_o, s)?;
    let n = tape.value(scores).len();
    if n == 1 {
        return tape.softmax(scores, None);
    }
    tape.softmax(scores, Some(&output_mask(n)))
}
