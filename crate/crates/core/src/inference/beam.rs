//! Beam search with length-normalised final ranking.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Anything that yields next-token log-probabilities from a decoder state.
pub trait StepModel {
    type State: Clone;

    fn vocab_size(&self) -> usize;

    /// Decoder state before the first token.
    fn start(&mut self) -> Result<Self::State>;

    /// Consumes `prev` from `state`; returns log-probabilities of the next
    /// token and the updated state.
    fn step(&mut self, state: &Self::State, prev: usize) -> Result<(Vec<f64>, Self::State)>;
}

/// Length normalisation applied to a finished hypothesis' log-probability.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PenaltyForm {
    /// `((5 + len) / 6)^α`
    Gnmt,
    /// `len^α`
    Power,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub beam_width: usize,
    /// Length penalty weight α.
    pub alpha: f64,
    pub max_len: usize,
    pub penalty: PenaltyForm,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            beam_width: 10,
            alpha: 2.1,
            max_len: 50,
            penalty: PenaltyForm::Gnmt,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beam_width < 1 {
            return Err(Error::invalid("beam width must be at least 1"));
        }
        if self.max_len < 1 {
            return Err(Error::invalid("max_len must be at least 1"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(
                "length penalty weight must be finite and non-negative",
            ));
        }
        Ok(())
    }

    pub fn length_penalty(&self, len: usize) -> f64 {
        let len = len as f64;
        match self.penalty {
            PenaltyForm::Gnmt => ((5.0 + len) / 6.0).powf(self.alpha),
            PenaltyForm::Power => len.powf(self.alpha),
        }
    }

    /// Ranking score of a hypothesis with `len` generated tokens.
    pub fn score(&self, log_prob: f64, len: usize) -> f64 {
        log_prob / self.length_penalty(len)
    }
}

/// Token ids with special roles during decoding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Specials {
    pub sos: usize,
    pub eos: usize,
    /// Never emitted.
    pub banned: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Hypothesis<S> {
    /// Generated tokens, EOS included when finished; SOS excluded.
    pub tokens: Vec<usize>,
    pub log_prob: f64,
    /// State before consuming the last token.
    pub state: S,
    pub finished: bool,
}

impl<S> Hypothesis<S> {
    fn last(&self, sos: usize) -> usize {
        self.tokens.last().copied().unwrap_or(sos)
    }

    /// Tokens without the trailing EOS.
    pub fn output(&self) -> &[usize] {
        if self.finished {
            &self.tokens[..self.tokens.len() - 1]
        } else {
            &self.tokens
        }
    }
}

/// The returned hypothesis and its ranking score.
#[derive(Clone, Debug)]
pub struct BeamResult<S> {
    pub best: Hypothesis<S>,
    pub score: f64,
}

/// Allowed tokens sorted by log-probability (ties: lower id), at most `k`.
fn top_k(log_probs: &[f64], k: usize, banned: &[usize]) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..log_probs.len())
        .filter(|i| !banned.contains(i) && log_probs[*i] > f64::NEG_INFINITY)
        .collect();
    ids.sort_by(|&a, &b| log_probs[b].total_cmp(&log_probs[a]).then(a.cmp(&b)));
    ids.truncate(k);
    ids
}

/// Each live hypothesis expands its `beam_width` best tokens. Expansions
/// ending in EOS are set aside as finished; the rest are pruned to
/// `beam_width` by log-probability. Finished hypotheses are ranked by
/// `log P / lp(len)`. Search ends at `max_len`, when nothing is live, or
/// when no live hypothesis can still beat the best finished one.
pub fn beam_search<M: StepModel>(
    model: &mut M,
    cfg: &DecodeConfig,
    sp: &Specials,
) -> Result<BeamResult<M::State>> {
    cfg.validate()?;
    let mut live = vec![Hypothesis {
        tokens: Vec::new(),
        log_prob: 0.0,
        state: model.start()?,
        finished: false,
    }];
    let mut finished: Vec<(f64, Hypothesis<M::State>)> = Vec::new();

    for depth in 1..=cfg.max_len {
        let mut candidates: Vec<(f64, usize, usize, Hypothesis<M::State>)> = Vec::new();
        for hyp in &live {
            let (lp, next_state) = model.step(&hyp.state, hyp.last(sp.sos))?;
            if lp.len() != model.vocab_size() {
                return Err(Error::shape(
                    "beam_search",
                    &[lp.len()],
                    &[model.vocab_size()],
                ));
            }
            for tok in top_k(&lp, cfg.beam_width, &sp.banned) {
                let mut tokens = hyp.tokens.clone();
                tokens.push(tok);
                let child = Hypothesis {
                    tokens,
                    log_prob: hyp.log_prob + lp[tok],
                    state: next_state.clone(),
                    finished: tok == sp.eos,
                };
                if child.finished {
                    finished.push((cfg.score(child.log_prob, depth), child));
                } else {
                    let order = candidates.len();
                    candidates.push((child.log_prob, tok, order, child));
                }
            }
        }
        candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        candidates.truncate(cfg.beam_width);
        live = candidates.into_iter().map(|c| c.3).collect();

        if live.is_empty() {
            break;
        }
        if let Some(best) = best_finished(&finished) {
            // log P only decreases and lp grows with length, so
            // log P / lp(max_len) bounds every continuation's score.
            let bound = live
                .iter()
                .map(|h| cfg.score(h.log_prob, cfg.max_len))
                .fold(f64::NEG_INFINITY, f64::max);
            if best.0 > bound {
                break;
            }
        }
    }

    if let Some(i) = best_finished_index(&finished) {
        let (score, best) = finished.swap_remove(i);
        return Ok(BeamResult { best, score });
    }
    // Nothing finished within max_len: best unfinished by the same ranking.
    let best = live
        .into_iter()
        .map(|h| (cfg.score(h.log_prob, h.tokens.len()), h))
        .reduce(|a, b| if b.0 > a.0 { b } else { a })
        .ok_or_else(|| Error::Numeric("beam search produced no hypothesis".into()))?;
    Ok(BeamResult {
        score: best.0,
        best: best.1,
    })
}

fn best_finished_index<S>(finished: &[(f64, Hypothesis<S>)]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, (s, _)) in finished.iter().enumerate() {
        if best.is_none_or(|b| *s > finished[b].0) {
            best = Some(i);
        }
    }
    best
}

fn best_finished<S>(finished: &[(f64, Hypothesis<S>)]) -> Option<&(f64, Hypothesis<S>)> {
    best_finished_index(finished).map(|i| &finished[i])
}

/// Argmax decoding until EOS or `max_len` tokens.
pub fn greedy<M: StepModel>(
    model: &mut M,
    max_len: usize,
    sp: &Specials,
) -> Result<Hypothesis<M::State>> {
    let mut hyp = Hypothesis {
        tokens: Vec::new(),
        log_prob: 0.0,
        state: model.start()?,
        finished: false,
    };
    while hyp.tokens.len() < max_len {
        let (lp, next) = model.step(&hyp.state, hyp.last(sp.sos))?;
        let tok = *top_k(&lp, 1, &sp.banned)
            .first()
            .ok_or_else(|| Error::Numeric("no admissible token".into()))?;
        hyp.tokens.push(tok);
        hyp.log_prob += lp[tok];
        hyp.state = next;
        if tok == sp.eos {
            hyp.finished = true;
            break;
        }
    }
    Ok(hyp)
}
