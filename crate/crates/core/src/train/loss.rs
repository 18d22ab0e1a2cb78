//! Teacher-forced cross-entropy over a right-padded batch.

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::model::{token_nlls, Dropout, ExampleIds, Model, Weights};
use crate::text::vocab::PAD;

/// Examples with their decoder targets right-padded to a common length.
#[derive(Clone, Debug)]
pub struct Batch<'a> {
    pub examples: Vec<&'a ExampleIds>,
    /// `targets[i]` is example `i`'s question + EOS, padded with PAD.
    pub targets: Vec<Vec<usize>>,
}

impl<'a> Batch<'a> {
    pub fn new(examples: Vec<&'a ExampleIds>) -> Result<Self> {
        if examples.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let raw: Vec<Vec<usize>> = examples.iter().map(|e| e.targets()).collect();
        let width = raw.iter().map(Vec::len).max().unwrap_or(0);
        let targets = raw
            .into_iter()
            .map(|mut t| {
                t.resize(width, PAD);
                t
            })
            .collect();
        Ok(Batch { examples, targets })
    }

    /// Non-pad target positions.
    pub fn token_count(&self) -> usize {
        self.targets.iter().flatten().filter(|&&t| t != PAD).count()
    }
}

/// Loss value and the gradient of every weight (canonical order).
#[derive(Clone, Debug)]
pub struct LossAndGrads {
    pub loss: f64,
    pub grads: Vec<Tensor>,
}

/// Records the batch loss on `tape`: mean of `-log p(y_t)` over non-pad
/// targets. Returns the loss node and the bound weights.
pub fn record_loss(
    tape: &mut Tape,
    model: &Model,
    batch: &Batch,
    drop: &mut Dropout,
) -> Result<(Var, Weights<Var>)> {
    let w = model.weights.bind(tape);
    let mut terms = Vec::new();
    for (ex, targets) in batch.examples.iter().zip(&batch.targets) {
        let len = targets.iter().take_while(|&&t| t != PAD).count();
        let nll = token_nlls(tape, &w, &model.config, ex, drop)?;
        terms.extend_from_slice(&nll[..len]);
    }
    let total = tape.add_all(&terms)?;
    let loss = tape.scale(total, 1.0 / terms.len() as f64);
    Ok((loss, w))
}

/// Loss without gradients.
pub fn nll_value(model: &Model, batch: &Batch, drop: &mut Dropout) -> Result<f64> {
    let mut tape = Tape::new();
    let (loss, _) = record_loss(&mut tape, model, batch, drop)?;
    Ok(tape.value(loss).item())
}

/// Loss and gradients. Gradients of frozen embedding rows are zeroed.
pub fn nll_loss(model: &Model, batch: &Batch, drop: &mut Dropout) -> Result<LossAndGrads> {
    let mut tape = Tape::new();
    let (loss, w) = record_loss(&mut tape, model, batch, drop)?;
    let g = tape.backward(loss)?;
    let mut grads = Vec::new();
    w.for_each(|_, &v| grads.push(g.get(v)));
    let emb = &mut grads[0];
    let dim = model.config.emb_dim;
    for (row, &frozen) in model.frozen_rows.iter().enumerate() {
        if frozen {
            emb.data_mut()[row * dim..(row + 1) * dim].fill(0.0);
        }
    }
    Ok(LossAndGrads {
        loss: tape.value(loss).item(),
        grads,
    })
}
