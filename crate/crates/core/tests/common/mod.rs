//! Oracles and fixtures shared by the integration tests. Everything here is
//! written independently of the code under test.
#![allow(dead_code)]

pub mod grad_cases;

use asqg_core::autodiff::{SeedRng, Tape, Tensor, Var};
use asqg_core::inference::{DecodeConfig, Specials, StepModel};
use asqg_core::model::{
    attend, condition, generate_distribution, keyword_net, Ablation, Dropout, EncodedAnswer, Model,
    ModelConfig,
};
use asqg_core::text::vocab::MASK_TOKEN;
use asqg_core::text::{preprocess, restore_entities, PreprocessOptions, Triplet};
use asqg_core::Result;
use rand::Rng;

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;

/// `|a - n| / max(|a|, |n|, floor)`. The floor keeps gradients that are zero
/// up to rounding from dominating.
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

pub fn random_tensor(rng: &mut SeedRng, shape: &[usize]) -> Tensor {
    Tensor::uniform(shape, -1.0, 1.0, rng)
}

/// Reduces any output to a scalar with fixed random weights so every output
/// element contributes to the checked gradient.
pub fn reduce(tape: &mut Tape, out: Var, weights: &[f64]) -> Result<Var> {
    let n = tape.value(out).len();
    let w = weights[..n].to_vec();
    let m = tape.mul_const(out, w)?;
    Ok(tape.sum(m))
}

/// Largest relative error between backprop and central differences over
/// every element of every input.
pub fn fd_check<F>(inputs: &[Tensor], build: F) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let eval = |vals: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = vals.iter().map(|t| tape.param(t.clone())).collect();
        let out = build(&mut tape, &vars)?;
        Ok(tape.value(out).item())
    };
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = build(&mut tape, &vars)?;
    let grads = tape.backward(out)?;
    let mut worst: f64 = 0.0;
    for (k, v) in vars.iter().enumerate() {
        let g = grads.get(*v);
        for i in 0..inputs[k].len() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[i] += FD_STEP;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[i] -= FD_STEP;
            let numeric = (eval(&plus)? - eval(&minus)?) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(g.data()[i], numeric));
        }
    }
    Ok(worst)
}

/// LCS length by enumerating every subsequence of `a` (|a| ≤ 8 or so).
pub fn brute_lcs<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut best = 0;
    for mask in 0u32..(1 << a.len()) {
        let sub: Vec<&T> = (0..a.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| &a[i])
            .collect();
        if sub.len() > best && is_subsequence(&sub, b) {
            best = sub.len();
        }
    }
    best
}

fn is_subsequence<T: PartialEq>(sub: &[&T], seq: &[T]) -> bool {
    let mut it = seq.iter();
    sub.iter().all(|x| it.any(|y| y == *x))
}

/// Every sequence over `0..v` of length `1..=max_len` (all enumerated).
pub fn all_sequences(v: usize, max_len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for t in 0..v {
                let mut s2: Vec<usize> = s.clone();
                s2.push(t);
                next.push(s2);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// A next-token table conditioned on the previous token and position.
/// `table[pos][prev]` is a probability row; `prev == v` stands for SOS.
#[derive(Clone, Debug)]
pub struct Markov {
    pub table: Vec<Vec<Vec<f64>>>,
    pub vocab: usize,
}

impl Markov {
    pub fn random(rng: &mut SeedRng, vocab: usize, positions: usize) -> Self {
        let table = (0..positions)
            .map(|_| {
                (0..=vocab)
                    .map(|_| {
                        let raw: Vec<f64> = (0..vocab)
                            .map(|_| rng.gen_range(0.05..1.0f64).powi(3))
                            .collect();
                        let z: f64 = raw.iter().sum();
                        raw.into_iter().map(|x| x / z).collect()
                    })
                    .collect()
            })
            .collect();
        Markov { table, vocab }
    }

    pub fn prob(&self, pos: usize, prev: usize, tok: usize) -> f64 {
        let p = pos.min(self.table.len() - 1);
        self.table[p][prev][tok]
    }

    /// log P of a full token sequence starting from SOS.
    pub fn log_prob(&self, seq: &[usize]) -> f64 {
        let mut prev = self.vocab;
        let mut lp = 0.0;
        for (pos, &t) in seq.iter().enumerate() {
            lp += self.prob(pos, prev, t).ln();
            prev = t;
        }
        lp
    }
}

impl StepModel for Markov {
    /// Position of the next token.
    type State = usize;

    fn vocab_size(&self) -> usize {
        self.vocab
    }

    fn start(&mut self) -> Result<usize> {
        Ok(0)
    }

    fn step(&mut self, pos: &usize, prev: usize) -> Result<(Vec<f64>, usize)> {
        let prev = if prev >= self.vocab { self.vocab } else { prev };
        let row = (0..self.vocab)
            .map(|t| self.prob(*pos, prev, t).ln())
            .collect();
        Ok((row, pos + 1))
    }
}

/// The 3-token model used by the beam oracle: token 2 is EOS. Short
/// continuations look good early but the long path through token 1 has
/// the better total.
pub fn hand_set_markov() -> Markov {
    let sos = vec![0.50, 0.35, 0.15];
    let after_a = vec![0.30, 0.30, 0.40];
    let after_b = vec![0.05, 0.90, 0.05];
    let after_eos = vec![1.0 / 3.0; 3];
    let row = vec![after_a, after_b, after_eos, sos];
    let mut late = row.clone();
    late[1] = vec![0.02, 0.08, 0.90];
    Markov {
        table: vec![row.clone(), row, late.clone(), late],
        vocab: 3,
    }
}

pub fn tiny_config(rng: &mut SeedRng, ablation: Ablation) -> ModelConfig {
    let vocab = rng.gen_range(6..12);
    let emb = rng.gen_range(2..7);
    let d_enc = rng.gen_range(1..5);
    let d_dec = rng.gen_range(2..8);
    let mut cfg = ModelConfig::new(vocab, emb, d_enc, d_dec);
    cfg.d_att = rng.gen_range(1..7);
    cfg.d_q = rng.gen_range(1..7);
    cfg.keyword_layers = rng.gen_range(0..4);
    cfg.ablation = ablation;
    cfg
}

pub fn tiny_model(seed: u64, ablation: Ablation) -> Model {
    let mut rng = SeedRng::new(seed);
    let cfg = tiny_config(&mut rng, ablation);
    let mut m = Model::random(cfg, &mut rng).expect("valid tiny config");
    // Spread the weights a little so the functions are not nearly linear.
    m.weights.for_each_mut(|_, t| {
        for x in t.data_mut() {
            *x *= 3.0;
        }
    });
    m
}

/// Random ids in `5..vocab` (no reserved tokens).
pub fn random_ids(rng: &mut SeedRng, vocab: usize, len: usize) -> Vec<usize> {
    (0..len).map(|_| rng.gen_range(5..vocab)).collect()
}

fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(String::from).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Label {
    Complete,
    Partial,
    Neither,
}

/// Ten question/answer pairs labelled by hand under the contiguous-span and
/// content-word rules.
pub fn inclusion_fixture() -> Vec<(Vec<String>, Vec<String>, Label)> {
    use Label::*;
    [
        (
            "who was john francis o'hara ?",
            "john francis o'hara",
            Complete,
        ),
        ("who was john francis ?", "john francis o'hara", Partial),
        ("who was elected ?", "john francis o'hara", Neither),
        ("what river flows through paris ?", "the seine", Neither),
        ("what is the seine ?", "the seine", Complete),
        ("which seine is longest ?", "the seine", Partial),
        ("when did the war of 1812 end ?", "1815", Neither),
        (
            "in what year was the treaty of paris signed ?",
            "treaty of ghent",
            Partial,
        ),
        ("what is in the box ?", "in the box", Complete),
        ("what is it made of ?", "of the", Neither),
    ]
    .into_iter()
    .map(|(q, a, l)| (toks(q), toks(a), l))
    .collect()
}

/// Ten questions with hand-assigned types; `None` is "other".
pub fn question_type_fixture() -> Vec<(Vec<String>, Option<&'static str>)> {
    [
        ("what is the capital of peru ?", Some("what")),
        ("in which year did the war end ?", Some("which")),
        ("how many people live there ?", Some("how")),
        ("the treaty was signed when ?", Some("when")),
        ("where is the museum ?", Some("where")),
        ("who wrote the letter ?", Some("who")),
        ("why did the bridge fall ?", Some("why")),
        ("is paris in france ?", Some("yes/no")),
        ("did the team win ?", Some("yes/no")),
        ("name the largest lake .", None),
    ]
    .into_iter()
    .map(|(q, t)| (toks(q), t))
    .collect()
}

const WORDS: [&str; 12] = [
    "the", "river", "city", "was", "built", "in", "north", "king", "paris", "john", "1850", ",",
];
const TAGS: [&str; 4] = ["PERSON", "LOCATION", "DATE", "ORGANIZATION"];

/// Random triplet with random NER tag runs and a question that reuses some
/// passage tokens.
pub fn fuzzed_triplet(rng: &mut SeedRng) -> Triplet {
    let n = rng.gen_range(1..30);
    let passage: Vec<String> = (0..n)
        .map(|_| WORDS[rng.gen_range(0..WORDS.len())].to_string())
        .collect();
    let start = rng.gen_range(0..n);
    let end = rng.gen_range(start + 1..=n);
    let mut tags = Vec::with_capacity(n);
    while tags.len() < n {
        let run = rng.gen_range(1..4);
        let tag = if rng.gen_bool(0.6) {
            "O".to_string()
        } else {
            TAGS[rng.gen_range(0..TAGS.len())].to_string()
        };
        for _ in 0..run {
            tags.push(tag.clone());
        }
    }
    tags.truncate(n);
    let q = rng.gen_range(1..10);
    let question = (0..q)
        .map(|_| {
            if rng.gen_bool(0.5) {
                passage[rng.gen_range(0..n)].clone()
            } else {
                WORDS[rng.gen_range(0..WORDS.len())].to_string()
            }
        })
        .collect();
    Triplet {
        passage_tokens: passage,
        answer_start: start,
        answer_end: end,
        question_tokens: question,
        ner_tags: Some(tags),
    }
}

/// Checks one triplet against the masking and round-trip invariants.
/// Returns a description of the first violation.
pub fn masking_violation(t: &Triplet) -> Option<String> {
    let plain = preprocess(
        t,
        PreprocessOptions {
            mask_answer: true,
            replace_entities: false,
        },
    )
    .ok()?;
    let p = &plain.masked_passage;
    if p.iter().filter(|x| *x == MASK_TOKEN).count() != 1 {
        return Some(format!("mask count in {p:?}"));
    }
    let n = t.passage_tokens.len();
    if p.len() != n - (t.answer_end - t.answer_start) + 1 {
        return Some("length".into());
    }
    // Everything outside the span is untouched and in place; nothing from
    // the span positions survives.
    if p[..t.answer_start] != t.passage_tokens[..t.answer_start]
        || p[t.answer_start + 1..] != t.passage_tokens[t.answer_end..]
    {
        return Some("tokens outside the span moved".into());
    }
    if plain.answer_tokens != t.passage_tokens[t.answer_start..t.answer_end] {
        return Some("answer tokens".into());
    }

    let full = match preprocess(t, PreprocessOptions::default()) {
        Ok(f) => f,
        Err(e) => return Some(e.to_string()),
    };
    if full
        .masked_passage
        .iter()
        .filter(|x| *x == MASK_TOKEN)
        .count()
        != 1
    {
        return Some("mask count after entity replacement".into());
    }
    let (restored, unknown) = restore_entities(&full.masked_passage, &full.matching_table);
    if unknown != 0 || &restored != p {
        return Some("passage round trip".into());
    }
    let (q, unknown) = restore_entities(&full.question_tokens, &full.matching_table);
    if unknown != 0 || q != t.question_tokens {
        return Some("question round trip".into());
    }
    None
}

/// Largest |sum - 1| of the attention, keyword-net and generator
/// distributions over `calls` random tiny networks, and whether PAD ever
/// received probability.
pub fn normalization_worst(calls: usize) -> (f64, bool) {
    let mut rng = SeedRng::new(77);
    let mut worst: f64 = 0.0;
    let mut pad_mass = false;
    for _ in 0..calls {
        let seed = rng.gen();
        let model = tiny_model(seed, Ablation::FULL);
        let cfg = &model.config;
        let (n, m) = (rng.gen_range(1..=6), rng.gen_range(1..=4));
        let passage = random_ids(&mut rng, cfg.vocab_size, n);
        let answer = random_ids(&mut rng, cfg.vocab_size, m);
        let mut tape = Tape::new();
        let w = model.weights.bind(&mut tape);
        let cond = condition(&mut tape, &w, &passage, &answer, &mut Dropout::eval())
            .expect("valid inputs");
        let s = tape.constant(Tensor::uniform(&[cfg.d_dec], -3.0, 3.0, &mut rng));

        let (alpha, context) =
            attend(&mut tape, &w, &cond.memory, s, &cond.passage).expect("attend");
        let (_, layers) = keyword_net(&mut tape, context, &cond.answer, 4).expect("keyword-net");
        let p = generate_distribution(&mut tape, &w, s, context).expect("generator");
        let mut sums = vec![tape.value(alpha).sum(), tape.value(p).sum()];
        sums.extend(layers.iter().map(|l| tape.value(*l).sum()));
        for x in sums {
            worst = worst.max((x - 1.0).abs());
        }
        pad_mass |= tape.value(p).data()[0] != 0.0;
    }
    (worst, pad_mass)
}

pub fn answer_from_rows(tape: &mut Tape, rows: &[Vec<f64>]) -> EncodedAnswer {
    let m = tape.constant(Tensor::from_rows(rows).unwrap());
    let states = (0..rows.len()).map(|i| tape.row(m, i).unwrap()).collect();
    EncodedAnswer {
        states,
        matrix: m,
        final_state: m,
    }
}

/// Number of single-token answers (100 random, 1..=4 layers each) whose
/// keyword-net output is not exactly the answer state.
pub fn single_token_fixed_point_failures() -> usize {
    let mut rng = SeedRng::new(3);
    let mut failures = 0;
    for _ in 0..100 {
        let d = rng.gen_range(1..9);
        let h: Vec<f64> = (0..d).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let mut tape = Tape::new();
        let answer = answer_from_rows(&mut tape, std::slice::from_ref(&h));
        let c = tape.constant(Tensor::uniform(&[d], -5.0, 5.0, &mut rng));
        for layers in 1..=4 {
            let (o, _) = keyword_net(&mut tape, c, &answer, layers).unwrap();
            if tape.value(o).data() != &h[..] {
                failures += 1;
            }
        }
    }
    failures
}

/// Largest deviation of keyword-net from a scalar re-derivation on the
/// h₁ = [1, 0], h₂ = [0, 1], c = [0.5, -0.5] case with four layers.
pub fn two_vector_hand_case_error() -> f64 {
    let h1 = [1.0f64, 0.0];
    let h2 = [0.0f64, 1.0];
    let c = [0.5f64, -0.5];
    // o ← p₁h₁ + p₂h₂ with p = softmax(hᵢ·o), four times.
    let mut o = c;
    for _ in 0..4 {
        let s1 = h1[0] * o[0] + h1[1] * o[1];
        let s2 = h2[0] * o[0] + h2[1] * o[1];
        let p1 = 1.0 / (1.0 + (s2 - s1).exp());
        let p2 = 1.0 - p1;
        o = [p1 * h1[0] + p2 * h2[0], p1 * h1[1] + p2 * h2[1]];
    }
    let mut tape = Tape::new();
    let answer = answer_from_rows(&mut tape, &[h1.to_vec(), h2.to_vec()]);
    let ctx = tape.constant(Tensor::vector(c.to_vec()).unwrap());
    let (got, _) = keyword_net(&mut tape, ctx, &answer, 4).unwrap();
    tape.value(got)
        .data()
        .iter()
        .zip(o)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// EOS of the Markov test models.
pub const MARKOV_EOS: usize = 2;

pub fn markov_specials() -> Specials {
    Specials {
        sos: 3,
        eos: MARKOV_EOS,
        banned: vec![],
    }
}

/// Best finished sequence by brute force: every sequence that ends with
/// its first EOS, scored with the length-penalised log-probability.
pub fn exhaustive(m: &Markov, cfg: &DecodeConfig) -> (Vec<usize>, f64) {
    all_sequences(m.vocab, cfg.max_len)
        .into_iter()
        .filter(|s| {
            s.last() == Some(&MARKOV_EOS) && s.iter().filter(|&&t| t == MARKOV_EOS).count() == 1
        })
        .map(|s| {
            let score = m.log_prob(&s) / cfg.length_penalty(s.len());
            (s, score)
        })
        .fold(
            (vec![], f64::NEG_INFINITY),
            |a, b| if b.1 > a.1 { b } else { a },
        )
}
