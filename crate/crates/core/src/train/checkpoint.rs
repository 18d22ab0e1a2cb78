//! Self-describing checkpoint container.
//!
//! Layout:
//!
//! ```text
//! ASQG1\n
//! <header: one line of JSON>\n
//! <payload: little-endian f64 values of every listed tensor, in order>
//! ```
//!
//! The header lists each tensor's name, shape and offset (in values) into the
//! payload, the model configuration, optimizer counters, the training
//! config hash and the indices of frozen embedding rows. Storing raw
//! little-endian floats makes a reload bit-exact.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::autodiff::{AdamConfig, AdamState, SeedRng, Tensor};
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig, Weights};

pub const MAGIC: &str = "ASQG1";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub adam: Option<AdamState>,
    pub epoch: usize,
    pub step: usize,
    pub config_hash: String,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
}

#[derive(Serialize, Deserialize)]
struct AdamHeader {
    config: AdamConfig,
    t: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    config_hash: String,
    model_config: ModelConfig,
    epoch: usize,
    step: usize,
    frozen_rows: Vec<usize>,
    adam: Option<AdamHeader>,
    tensors: Vec<TensorEntry>,
}

impl Checkpoint {
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let mut entries = Vec::new();
        let mut payload: Vec<&Tensor> = Vec::new();
        let mut offset = 0;
        let mut add = |name: String, t: &Tensor, entries: &mut Vec<TensorEntry>| {
            entries.push(TensorEntry {
                name,
                shape: t.shape().to_vec(),
                offset,
            });
            offset += t.len();
        };
        let named = self.model.weights.named();
        for (name, t) in &named {
            add(name.clone(), t, &mut entries);
            payload.push(t);
        }
        if let Some(adam) = &self.adam {
            for ((name, _), m) in named.iter().zip(&adam.first) {
                add(format!("adam.m.{name}"), m, &mut entries);
                payload.push(m);
            }
            for ((name, _), v) in named.iter().zip(&adam.second) {
                add(format!("adam.v.{name}"), v, &mut entries);
                payload.push(v);
            }
        }
        let header = Header {
            format_version: 1,
            config_hash: self.config_hash.clone(),
            model_config: self.model.config.clone(),
            epoch: self.epoch,
            step: self.step,
            frozen_rows: self
                .model
                .frozen_rows
                .iter()
                .enumerate()
                .filter(|(_, &f)| f)
                .map(|(i, _)| i)
                .collect(),
            adam: self.adam.as_ref().map(|a| AdamHeader {
                config: a.config.clone(),
                t: a.t,
            }),
            tensors: entries,
        };
        writeln!(w, "{MAGIC}")?;
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for t in payload {
            for x in t.data() {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: BufRead>(mut r: R) -> Result<Self> {
        let mut line = String::new();
        r.read_line(&mut line)?;
        if line.trim_end() != MAGIC {
            return Err(Error::Checkpoint(format!(
                "bad magic {:?}",
                line.trim_end()
            )));
        }
        line.clear();
        r.read_line(&mut line)?;
        let header: Header = serde_json::from_str(&line)?;
        if header.format_version != 1 {
            return Err(Error::Checkpoint(format!(
                "unsupported version {}",
                header.format_version
            )));
        }
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() % 8 != 0 {
            return Err(Error::Checkpoint(
                "payload is not a whole number of f64".into(),
            ));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();

        let lookup = |name: &str| -> Result<Tensor> {
            let e = header
                .tensors
                .iter()
                .find(|e| e.name == name)
                .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
            let n: usize = e.shape.iter().product();
            let slice = values
                .get(e.offset..e.offset + n)
                .ok_or_else(|| Error::Checkpoint(format!("tensor {name} runs past payload")))?;
            Tensor::new(e.shape.clone(), slice.to_vec())
        };

        let cfg = header.model_config.clone();
        cfg.validate()?;
        let template = Tensor::zeros(&[cfg.vocab_size, cfg.emb_dim]);
        let mut weights = Weights::init(&cfg, template, &mut SeedRng::new(0));
        let mut failure = None;
        weights.for_each_mut(|name, t| {
            if failure.is_some() {
                return;
            }
            match lookup(name) {
                Ok(v) if v.shape() == t.shape() => *t = v,
                Ok(v) => {
                    failure = Some(Error::Checkpoint(format!(
                        "tensor {name} has shape {:?}, expected {:?}",
                        v.shape(),
                        t.shape()
                    )))
                }
                Err(e) => failure = Some(e),
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }

        let adam = match &header.adam {
            Some(a) => {
                let names: Vec<String> = weights.named().into_iter().map(|(n, _)| n).collect();
                let first = names
                    .iter()
                    .map(|n| lookup(&format!("adam.m.{n}")))
                    .collect::<Result<Vec<_>>>()?;
                let second = names
                    .iter()
                    .map(|n| lookup(&format!("adam.v.{n}")))
                    .collect::<Result<Vec<_>>>()?;
                Some(AdamState {
                    config: a.config.clone(),
                    t: a.t,
                    first,
                    second,
                })
            }
            None => None,
        };

        let mut frozen_rows = vec![false; cfg.vocab_size];
        for &i in &header.frozen_rows {
            *frozen_rows
                .get_mut(i)
                .ok_or_else(|| Error::Checkpoint(format!("frozen row {i} out of range")))? = true;
        }
        Ok(Checkpoint {
            model: Model {
                config: cfg,
                weights,
                frozen_rows,
            },
            adam,
            epoch: header.epoch,
            step: header.step,
            config_hash: header.config_hash,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write(std::io::BufWriter::new(f))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Checkpoint::read(std::io::BufReader::new(f))
    }
}
