//! Mini-batch Adam training loop.

use log::{info, warn};
use rand::seq::SliceRandom;

use super::checkpoint::Checkpoint;
use super::config::TrainConfig;
use super::loss::{nll_loss, nll_value, Batch};
use crate::autodiff::{AdamState, SeedRng, Tensor};
use crate::error::{Error, Result};
use crate::model::{Dropout, ExampleIds, Model};

/// One row of the loss log. `dev_loss` is filled on the last step of an
/// epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct LossRecord {
    pub step: usize,
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_loss: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckpointKind {
    Epoch(usize),
    /// New lowest dev loss (training loss when there is no dev set).
    Best,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub log: Vec<LossRecord>,
    pub final_checkpoint: Checkpoint,
    pub best_epoch: usize,
    pub best_loss: f64,
}

impl TrainOutcome {
    /// `step,epoch,train_loss,dev_loss` rows with a header line.
    pub fn loss_csv(&self) -> String {
        let mut out = String::from("step,epoch,train_loss,dev_loss\n");
        for r in &self.log {
            let dev = r.dev_loss.map(|d| format!("{d:?}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{:?},{}\n",
                r.step, r.epoch, r.train_loss, dev
            ));
        }
        out
    }
}

/// Drops examples whose passage or question exceeds the caps. Returns the
/// kept examples and how many were dropped.
pub fn filter_lengths(examples: Vec<ExampleIds>, cfg: &TrainConfig) -> (Vec<ExampleIds>, usize) {
    let before = examples.len();
    let kept: Vec<ExampleIds> = examples
        .into_iter()
        .filter(|e| {
            e.passage.len() <= cfg.max_passage_len && e.question.len() <= cfg.max_question_len
        })
        .collect();
    let dropped = before - kept.len();
    if dropped > 0 {
        warn!("dropped {dropped} examples longer than the length caps");
    }
    (kept, dropped)
}

/// Trains `model` in place. `on_checkpoint` receives every epoch checkpoint
/// and each new best.
pub fn train<F>(
    cfg: &TrainConfig,
    model: &mut Model,
    train_set: &[ExampleIds],
    dev_set: &[ExampleIds],
    mut on_checkpoint: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&Checkpoint, CheckpointKind) -> Result<()>,
{
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    let mut rng = SeedRng::new(cfg.seed);
    let mut shuffle_rng = rng.split();
    let mut dropout_rng = rng.split();
    let hash = cfg.hash();

    let params: Vec<&Tensor> = model.weights.named().into_iter().map(|(_, t)| t).collect();
    let mut adam = AdamState::new(cfg.adam(), &params);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut log = Vec::new();
    let mut step = 0;
    let mut best: Option<(usize, f64)> = None;
    let mut last_checkpoint = None;

    'epochs: for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        let mut epoch_batches = 0;
        let chunks: Vec<&[usize]> = order.chunks(cfg.batch_size).collect();
        for (bi, chunk) in chunks.iter().enumerate() {
            let batch = Batch::new(chunk.iter().map(|&i| &train_set[i]).collect())?;
            let mut drop = Dropout::train(cfg.p_drop, dropout_rng.split())?;
            step += 1;
            let non_finite = || Error::NonFiniteLoss {
                step,
                epoch,
                batch: chunk.to_vec(),
            };
            let out = match nll_loss(model, &batch, &mut drop) {
                Ok(out) => out,
                // NaN reaching a softmax surfaces as a numeric error.
                Err(Error::Numeric(_)) => return Err(non_finite()),
                Err(e) => return Err(e),
            };
            if !out.loss.is_finite() || out.grads.iter().any(|g| !g.all_finite()) {
                return Err(non_finite());
            }
            let grads: Vec<&Tensor> = out.grads.iter().collect();
            let mut params: Vec<&mut Tensor> = Vec::new();
            model.weights.for_each_mut(|_, t| params.push(t));
            adam.step(&mut params, &grads)?;

            epoch_loss += out.loss;
            epoch_batches += 1;
            log.push(LossRecord {
                step,
                epoch,
                train_loss: out.loss,
                dev_loss: None,
            });

            let last_in_epoch = bi + 1 == chunks.len();
            let budget_hit = cfg.max_steps > 0 && step >= cfg.max_steps;
            if last_in_epoch || budget_hit {
                let selection = if dev_set.is_empty() {
                    epoch_loss / epoch_batches as f64
                } else {
                    let dev_batch = Batch::new(dev_set.iter().collect())?;
                    let d = nll_value(model, &dev_batch, &mut Dropout::eval())?;
                    log.last_mut().expect("just pushed").dev_loss = Some(d);
                    d
                };
                info!(
                    "epoch {epoch} step {step}: train {:.5} select {selection:.5}",
                    out.loss
                );
                let ck = Checkpoint {
                    model: model.clone(),
                    adam: Some(adam.clone()),
                    epoch,
                    step,
                    config_hash: hash.clone(),
                };
                on_checkpoint(&ck, CheckpointKind::Epoch(epoch))?;
                if best.is_none_or(|(_, b)| selection < b) {
                    best = Some((epoch, selection));
                    on_checkpoint(&ck, CheckpointKind::Best)?;
                }
                last_checkpoint = Some(ck);
            }
            if budget_hit {
                break 'epochs;
            }
        }
    }

    let (best_epoch, best_loss) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        log,
        final_checkpoint: last_checkpoint.expect("at least one epoch ran"),
        best_epoch,
        best_loss,
    })
}
