//! Bidirectional LSTM encoders for the masked passage and the answer.

use super::weights::{LstmWeights, Weights};
use super::Dropout;
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// One LSTM cell update. Returns `(h, c)`.
pub fn lstm_step(
    tape: &mut Tape,
    w: &LstmWeights<Var>,
    x: Var,
    h: Var,
    c: Var,
) -> Result<(Var, Var)> {
    let d = tape.value(h).len();
    let zx = tape.matvec(w.w_x, x)?;
    let zh = tape.matvec(w.w_h, h)?;
    let z = tape.add(zx, zh)?;
    let z = tape.add(z, w.b)?;
    let i = tape.slice(z, 0, d)?;
    let f = tape.slice(z, d, d)?;
    let g = tape.slice(z, 2 * d, d)?;
    let o = tape.slice(z, 3 * d, d)?;
    let i = tape.sigmoid(i);
    let f = tape.sigmoid(f);
    let g = tape.tanh(g);
    let o = tape.sigmoid(o);
    let fc = tape.mul(f, c)?;
    let ig = tape.mul(i, g)?;
    let c_new = tape.add(fc, ig)?;
    let tc = tape.tanh(c_new);
    let h_new = tape.mul(o, tc)?;
    Ok((h_new, c_new))
}

/// Runs `w` over `inputs` from a zero state. With `reverse` the scan goes
/// right to left; the returned states are always aligned with `inputs`.
pub fn run_lstm(
    tape: &mut Tape,
    w: &LstmWeights<Var>,
    inputs: &[Var],
    reverse: bool,
) -> Result<Vec<Var>> {
    let d = tape.value(w.w_h).shape()[1];
    let mut h = tape.constant(Tensor::zeros(&[d]));
    let mut c = tape.constant(Tensor::zeros(&[d]));
    let mut states = vec![h; inputs.len()];
    let order: Box<dyn Iterator<Item = usize>> = if reverse {
        Box::new((0..inputs.len()).rev())
    } else {
        Box::new(0..inputs.len())
    };
    for i in order {
        (h, c) = lstm_step(tape, w, inputs[i], h, c)?;
        states[i] = h;
    }
    Ok(states)
}

/// Per-position states `[→h_i ; ←h_i]` of the masked passage.
#[derive(Clone, Debug)]
pub struct EncodedPassage {
    pub states: Vec<Var>,
    /// The states stacked as an `[n × 2·d_enc]` matrix.
    pub matrix: Var,
}

impl EncodedPassage {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct EncodedAnswer {
    pub states: Vec<Var>,
    pub matrix: Var,
    /// `[→h_m ; ←h_1]`: the last forward state and the backward state that
    /// has read the whole answer.
    pub final_state: Var,
}

fn embed(tape: &mut Tape, w: &Weights<Var>, ids: &[usize], drop: &mut Dropout) -> Result<Vec<Var>> {
    let vocab = tape.value(w.embedding).shape()[0];
    ids.iter()
        .map(|&id| {
            if id >= vocab {
                return Err(Error::UnknownToken(id));
            }
            let e = tape.row(w.embedding, id)?;
            drop.apply(tape, e)
        })
        .collect()
}

fn bidirectional(
    tape: &mut Tape,
    fwd: &LstmWeights<Var>,
    bwd: &LstmWeights<Var>,
    inputs: &[Var],
) -> Result<(Vec<Var>, Vec<Var>, Vec<Var>)> {
    let f = run_lstm(tape, fwd, inputs, false)?;
    let b = run_lstm(tape, bwd, inputs, true)?;
    let cat = f
        .iter()
        .zip(&b)
        .map(|(&x, &y)| tape.concat(&[x, y]))
        .collect::<Result<Vec<_>>>()?;
    Ok((f, b, cat))
}

pub fn encode_passage(
    tape: &mut Tape,
    w: &Weights<Var>,
    ids: &[usize],
    drop: &mut Dropout,
) -> Result<EncodedPassage> {
    if ids.is_empty() {
        return Err(Error::invalid("cannot encode an empty passage"));
    }
    let inputs = embed(tape, w, ids, drop)?;
    let (_, _, cat) = bidirectional(tape, &w.passage_fwd, &w.passage_bwd, &inputs)?;
    let states = cat
        .into_iter()
        .map(|s| drop.apply(tape, s))
        .collect::<Result<Vec<_>>>()?;
    let matrix = tape.stack(&states)?;
    Ok(EncodedPassage { states, matrix })
}

pub fn encode_answer(
    tape: &mut Tape,
    w: &Weights<Var>,
    ids: &[usize],
    drop: &mut Dropout,
) -> Result<EncodedAnswer> {
    if ids.is_empty() {
        return Err(Error::invalid("cannot encode an empty answer"));
    }
    let inputs = embed(tape, w, ids, drop)?;
    let (f, b, cat) = bidirectional(tape, &w.answer_fwd, &w.answer_bwd, &inputs)?;
    let final_state = tape.concat(&[f[f.len() - 1], b[0]])?;
    let states = cat
        .into_iter()
        .map(|s| drop.apply(tape, s))
        .collect::<Result<Vec<_>>>()?;
    let matrix = tape.stack(&states)?;
    Ok(EncodedAnswer {
        states,
        matrix,
        final_state,
    })
}
