//! Trainable weights, generic over storage so the same layout describes
//! owned tensors and their handles on a tape.

use rand::Rng;

use super::config::ModelConfig;
use crate::autodiff::{Tape, Tensor, Var};

/// Gate weights of one LSTM, gates stacked as `[input, forget, cell, output]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmWeights<T> {
    /// `[4d × input]`
    pub w_x: T,
    /// `[4d × d]`
    pub w_h: T,
    /// `[4d]`
    pub b: T,
}

/// Additive attention; `W_c` and `U_c` are kept as direction and gain.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionWeights<T> {
    /// `[d_att × d_dec]`
    pub w_dir: T,
    pub w_gain: T,
    /// `[d_att × 2·d_enc]`
    pub u_dir: T,
    pub u_gain: T,
    /// `[d_att]`
    pub v: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorWeights<T> {
    /// `[d_q × (d_dec + 2·d_enc)]`
    pub w_q: T,
    /// `[d_q × emb_dim]`
    pub w_a: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Weights<T> {
    /// `[|V| × emb_dim]`
    pub embedding: T,
    pub passage_fwd: LstmWeights<T>,
    pub passage_bwd: LstmWeights<T>,
    pub answer_fwd: LstmWeights<T>,
    pub answer_bwd: LstmWeights<T>,
    pub attention: AttentionWeights<T>,
    pub decoder: LstmWeights<T>,
    /// `[d_dec × 2·d_enc]`, present when the decoder starts from the answer.
    pub init: Option<T>,
    /// Retrieval output layer.
    pub generator: Option<GeneratorWeights<T>>,
    /// `[|V| × d_dec]` softmax projection used when the retrieval layer is off.
    pub output: Option<T>,
}

impl<T> LstmWeights<T> {
    fn map<U>(&self, prefix: &str, f: &mut impl FnMut(&str, &T) -> U) -> LstmWeights<U> {
        LstmWeights {
            w_x: f(&format!("{prefix}.w_x"), &self.w_x),
            w_h: f(&format!("{prefix}.w_h"), &self.w_h),
            b: f(&format!("{prefix}.b"), &self.b),
        }
    }
}

impl<T> Weights<T> {
    /// Applies `f` to every weight in a fixed canonical order, passing its
    /// dotted name.
    pub fn map<U>(&self, mut f: impl FnMut(&str, &T) -> U) -> Weights<U> {
        let f = &mut f;
        Weights {
            embedding: f("embedding", &self.embedding),
            passage_fwd: self.passage_fwd.map("passage_fwd", f),
            passage_bwd: self.passage_bwd.map("passage_bwd", f),
            answer_fwd: self.answer_fwd.map("answer_fwd", f),
            answer_bwd: self.answer_bwd.map("answer_bwd", f),
            attention: AttentionWeights {
                w_dir: f("attention.w_dir", &self.attention.w_dir),
                w_gain: f("attention.w_gain", &self.attention.w_gain),
                u_dir: f("attention.u_dir", &self.attention.u_dir),
                u_gain: f("attention.u_gain", &self.attention.u_gain),
                v: f("attention.v", &self.attention.v),
            },
            decoder: self.decoder.map("decoder", f),
            init: self.init.as_ref().map(|t| f("init", t)),
            generator: self.generator.as_ref().map(|g| GeneratorWeights {
                w_q: f("generator.w_q", &g.w_q),
                w_a: f("generator.w_a", &g.w_a),
            }),
            output: self.output.as_ref().map(|t| f("output", t)),
        }
    }

    /// Same order as [`Weights::map`].
    pub fn for_each_mut<'a>(&'a mut self, mut f: impl FnMut(&str, &'a mut T)) {
        let Weights {
            embedding,
            passage_fwd,
            passage_bwd,
            answer_fwd,
            answer_bwd,
            attention,
            decoder,
            init,
            generator,
            output,
        } = self;
        f("embedding", embedding);
        let lstm = |prefix: &str, l: &'a mut LstmWeights<T>, f: &mut dyn FnMut(&str, &'a mut T)| {
            f(&format!("{prefix}.w_x"), &mut l.w_x);
            f(&format!("{prefix}.w_h"), &mut l.w_h);
            f(&format!("{prefix}.b"), &mut l.b);
        };
        lstm("passage_fwd", passage_fwd, &mut f);
        lstm("passage_bwd", passage_bwd, &mut f);
        lstm("answer_fwd", answer_fwd, &mut f);
        lstm("answer_bwd", answer_bwd, &mut f);
        f("attention.w_dir", &mut attention.w_dir);
        f("attention.w_gain", &mut attention.w_gain);
        f("attention.u_dir", &mut attention.u_dir);
        f("attention.u_gain", &mut attention.u_gain);
        f("attention.v", &mut attention.v);
        lstm("decoder", decoder, &mut f);
        if let Some(t) = init {
            f("init", t);
        }
        if let Some(g) = generator {
            f("generator.w_q", &mut g.w_q);
            f("generator.w_a", &mut g.w_a);
        }
        if let Some(t) = output {
            f("output", t);
        }
    }

    /// Same order as [`Weights::map`].
    pub fn for_each(&self, mut f: impl FnMut(&str, &T)) {
        self.map(|name, t| f(name, t));
    }

    /// Weights with their names, in canonical order.
    pub fn named(&self) -> Vec<(String, &T)> {
        let mut out = Vec::new();
        self.for_each_ref(&mut |name, t| out.push((name.to_string(), t)));
        out
    }

    fn for_each_ref<'a>(&'a self, f: &mut impl FnMut(&str, &'a T)) {
        f("embedding", &self.embedding);
        for (prefix, l) in [
            ("passage_fwd", &self.passage_fwd),
            ("passage_bwd", &self.passage_bwd),
            ("answer_fwd", &self.answer_fwd),
            ("answer_bwd", &self.answer_bwd),
        ] {
            f(&format!("{prefix}.w_x"), &l.w_x);
            f(&format!("{prefix}.w_h"), &l.w_h);
            f(&format!("{prefix}.b"), &l.b);
        }
        f("attention.w_dir", &self.attention.w_dir);
        f("attention.w_gain", &self.attention.w_gain);
        f("attention.u_dir", &self.attention.u_dir);
        f("attention.u_gain", &self.attention.u_gain);
        f("attention.v", &self.attention.v);
        f("decoder.w_x", &self.decoder.w_x);
        f("decoder.w_h", &self.decoder.w_h);
        f("decoder.b", &self.decoder.b);
        if let Some(t) = &self.init {
            f("init", t);
        }
        if let Some(g) = &self.generator {
            f("generator.w_q", &g.w_q);
            f("generator.w_a", &g.w_a);
        }
        if let Some(t) = &self.output {
            f("output", t);
        }
    }
}

impl Weights<Tensor> {
    /// uniform(-0.1, 0.1) everywhere except forget-gate biases (1.0) and
    /// attention gains (1.0).
    pub fn init<R: Rng + ?Sized>(cfg: &ModelConfig, embedding: Tensor, rng: &mut R) -> Self {
        let mut u = |shape: &[usize]| Tensor::uniform(shape, -0.1, 0.1, rng);
        let lstm = |input: usize, d: usize, u: &mut dyn FnMut(&[usize]) -> Tensor| {
            let mut b = u(&[4 * d]);
            b.data_mut()[d..2 * d].iter_mut().for_each(|x| *x = 1.0);
            LstmWeights {
                w_x: u(&[4 * d, input]),
                w_h: u(&[4 * d, d]),
                b,
            }
        };
        let enc = cfg.enc_out();
        let passage_fwd = lstm(cfg.emb_dim, cfg.d_enc, &mut u);
        let passage_bwd = lstm(cfg.emb_dim, cfg.d_enc, &mut u);
        let answer_fwd = lstm(cfg.emb_dim, cfg.d_enc, &mut u);
        let answer_bwd = lstm(cfg.emb_dim, cfg.d_enc, &mut u);
        let attention = AttentionWeights {
            w_dir: u(&[cfg.d_att, cfg.d_dec]),
            w_gain: Tensor::scalar(1.0),
            u_dir: u(&[cfg.d_att, enc]),
            u_gain: Tensor::scalar(1.0),
            v: u(&[cfg.d_att]),
        };
        let decoder = lstm(cfg.decoder_input(), cfg.d_dec, &mut u);
        let init = cfg.ablation.answer_decoder.then(|| u(&[cfg.d_dec, enc]));
        let generator = cfg.ablation.retrieval_generator.then(|| GeneratorWeights {
            w_q: u(&[cfg.d_q, cfg.d_dec + enc]),
            w_a: u(&[cfg.d_q, cfg.emb_dim]),
        });
        let output = (!cfg.ablation.retrieval_generator).then(|| u(&[cfg.vocab_size, cfg.d_dec]));
        Weights {
            embedding,
            passage_fwd,
            passage_bwd,
            answer_fwd,
            answer_bwd,
            attention,
            decoder,
            init,
            generator,
            output,
        }
    }

    /// Registers every weight as a trainable leaf.
    pub fn bind(&self, tape: &mut Tape) -> Weights<Var> {
        self.map(|_, t| tape.param(t.clone()))
    }

    pub fn parameter_count(&self) -> usize {
        let mut n = 0;
        self.map(|_, t| n += t.len());
        n
    }
}
