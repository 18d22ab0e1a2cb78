//! Flat `key = value` training configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autodiff::AdamConfig;
use crate::error::{Error, Result};
use crate::model::{Ablation, ModelConfig};
use crate::text::vocab::DEFAULT_CAP;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop after this many optimizer steps; 0 means no limit.
    pub max_steps: usize,
    pub p_drop: f64,
    pub emb_dim: usize,
    pub d_enc: usize,
    pub d_dec: usize,
    pub d_att: usize,
    pub d_q: usize,
    pub keyword_layers: usize,
    pub vocab_cap: usize,
    pub seed: u64,
    pub max_passage_len: usize,
    pub max_question_len: usize,
    /// Optional GloVe file; when empty embeddings start random.
    pub glove: String,
    pub ablation: Ablation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            batch_size: 128,
            max_epochs: 17,
            max_steps: 0,
            p_drop: 0.4,
            emb_dim: 300,
            d_enc: 32,
            d_dec: 32,
            d_att: 32,
            d_q: 32,
            keyword_layers: 4,
            vocab_cap: DEFAULT_CAP,
            seed: 1,
            max_passage_len: 200,
            max_question_len: 50,
            glove: String::new(),
            ablation: Ablation::FULL,
        }
    }
}

const KEYS: [&str; 20] = [
    "lr",
    "batch_size",
    "max_epochs",
    "max_steps",
    "p_drop",
    "emb_dim",
    "d_enc",
    "d_dec",
    "d_att",
    "d_q",
    "keyword_layers",
    "vocab_cap",
    "seed",
    "max_passage_len",
    "max_question_len",
    "glove",
    "mask_answer",
    "keyword_net",
    "answer_decoder",
    "retrieval_generator",
];

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::parse(line, format!("bad value {v:?} for {key}")))
}

fn flag(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::parse(line, format!("bad boolean {v:?} for {key}"))),
    }
}

impl TrainConfig {
    /// Parses `key = value` lines on top of the defaults. `#` starts a
    /// comment. Unknown or repeated keys are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body
                .split_once('=')
                .ok_or_else(|| Error::parse(line, "expected key = value"))?;
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(Error::parse(line, format!("unknown key {k:?}")));
            }
            if !seen.insert(k.to_string()) {
                return Err(Error::parse(line, format!("duplicate key {k:?}")));
            }
            cfg.set(line, k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, line: usize, k: &str, v: &str) -> Result<()> {
        match k {
            "lr" => self.lr = num(line, k, v)?,
            "batch_size" => self.batch_size = num(line, k, v)?,
            "max_epochs" => self.max_epochs = num(line, k, v)?,
            "max_steps" => self.max_steps = num(line, k, v)?,
            "p_drop" => self.p_drop = num(line, k, v)?,
            "emb_dim" => self.emb_dim = num(line, k, v)?,
            "d_enc" => self.d_enc = num(line, k, v)?,
            "d_dec" => self.d_dec = num(line, k, v)?,
            "d_att" => self.d_att = num(line, k, v)?,
            "d_q" => self.d_q = num(line, k, v)?,
            "keyword_layers" => self.keyword_layers = num(line, k, v)?,
            "vocab_cap" => self.vocab_cap = num(line, k, v)?,
            "seed" => self.seed = num(line, k, v)?,
            "max_passage_len" => self.max_passage_len = num(line, k, v)?,
            "max_question_len" => self.max_question_len = num(line, k, v)?,
            "glove" => self.glove = v.to_string(),
            "mask_answer" => self.ablation.mask_answer = flag(line, k, v)?,
            "keyword_net" => self.ablation.keyword_net = flag(line, k, v)?,
            "answer_decoder" => self.ablation.answer_decoder = flag(line, k, v)?,
            "retrieval_generator" => self.ablation.retrieval_generator = flag(line, k, v)?,
            _ => unreachable!("key list checked by caller"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.p_drop) {
            return Err(Error::invalid(format!(
                "p_drop {} outside [0, 1)",
                self.p_drop
            )));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid("lr must be positive"));
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("max_epochs", self.max_epochs),
            ("emb_dim", self.emb_dim),
            ("d_enc", self.d_enc),
            ("d_dec", self.d_dec),
            ("d_att", self.d_att),
            ("d_q", self.d_q),
            ("vocab_cap", self.vocab_cap),
            ("max_passage_len", self.max_passage_len),
            ("max_question_len", self.max_question_len),
        ] {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be positive")));
            }
        }
        Ok(())
    }

    /// Canonical `key = value` rendering, keys sorted.
    pub fn render(&self) -> String {
        let a = self.ablation;
        let mut m = BTreeMap::new();
        m.insert("lr", format!("{:?}", self.lr));
        m.insert("batch_size", self.batch_size.to_string());
        m.insert("max_epochs", self.max_epochs.to_string());
        m.insert("max_steps", self.max_steps.to_string());
        m.insert("p_drop", format!("{:?}", self.p_drop));
        m.insert("emb_dim", self.emb_dim.to_string());
        m.insert("d_enc", self.d_enc.to_string());
        m.insert("d_dec", self.d_dec.to_string());
        m.insert("d_att", self.d_att.to_string());
        m.insert("d_q", self.d_q.to_string());
        m.insert("keyword_layers", self.keyword_layers.to_string());
        m.insert("vocab_cap", self.vocab_cap.to_string());
        m.insert("seed", self.seed.to_string());
        m.insert("max_passage_len", self.max_passage_len.to_string());
        m.insert("max_question_len", self.max_question_len.to_string());
        m.insert("glove", self.glove.clone());
        m.insert("mask_answer", a.mask_answer.to_string());
        m.insert("keyword_net", a.keyword_net.to_string());
        m.insert("answer_decoder", a.answer_decoder.to_string());
        m.insert("retrieval_generator", a.retrieval_generator.to_string());
        let mut out = String::new();
        for (k, v) in m {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Hex SHA-256 of [`TrainConfig::render`].
    pub fn hash(&self) -> String {
        hex_digest(self.render().as_bytes())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
    }

    pub fn model_config(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            vocab_size,
            emb_dim: self.emb_dim,
            d_enc: self.d_enc,
            d_dec: self.d_dec,
            d_att: self.d_att,
            d_q: self.d_q,
            keyword_layers: self.keyword_layers,
            ablation: self.ablation,
        }
    }
}

/// Lowercase hex SHA-256.
pub fn hex_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
