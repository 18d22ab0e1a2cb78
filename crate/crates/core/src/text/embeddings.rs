//! GloVe text-format loader.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::Rng;

use super::vocab::Vocab;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

pub const GLOVE_DIM: usize = 300;

/// Word embedding matrix with per-row trainability. Rows copied from a
/// pre-trained file are frozen.
#[derive(Clone, Debug, PartialEq)]
pub struct Embeddings {
    pub matrix: Tensor,
    pub frozen: Vec<bool>,
}

impl Embeddings {
    /// All rows uniform(-0.1, 0.1) and trainable.
    pub fn random<R: Rng + ?Sized>(vocab_size: usize, dim: usize, rng: &mut R) -> Self {
        Embeddings {
            matrix: Tensor::uniform(&[vocab_size, dim], -0.1, 0.1, rng),
            frozen: vec![false; vocab_size],
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.shape()[1]
    }

    pub fn frozen_rows(&self) -> usize {
        self.frozen.iter().filter(|&&f| f).count()
    }
}

/// Loads 300-d GloVe vectors for `vocab` from `path`.
pub fn load_embeddings<R: Rng + ?Sized>(
    vocab: &Vocab,
    path: &Path,
    rng: &mut R,
) -> Result<Embeddings> {
    let f = File::open(path)?;
    read_embeddings(vocab, BufReader::new(f), GLOVE_DIM, rng)
}

/// Reads `word v1 … v_dim` lines. Words in the vocabulary get their file
/// vector and are frozen; every other row (reserved tokens included) is
/// drawn uniform(-0.1, 0.1) and left trainable.
pub fn read_embeddings<B: BufRead, R: Rng + ?Sized>(
    vocab: &Vocab,
    reader: B,
    dim: usize,
    rng: &mut R,
) -> Result<Embeddings> {
    let mut emb = Embeddings::random(vocab.len(), dim, rng);
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split(' ').filter(|s| !s.is_empty());
        let word = parts
            .next()
            .ok_or_else(|| Error::parse(i + 1, "missing word"))?;
        let values = parts
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::parse(i + 1, format!("bad number {s:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != dim {
            return Err(Error::parse(
                i + 1,
                format!("expected {dim} values for {word:?}, found {}", values.len()),
            ));
        }
        if !vocab.contains(word) {
            continue;
        }
        let id = vocab.id(word);
        if emb.frozen[id] {
            continue;
        }
        emb.matrix.row_mut(id).copy_from_slice(&values);
        emb.frozen[id] = true;
    }
    Ok(emb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::SeedRng;
    use crate::text::vocab::{MASK, MASK_TOKEN};

    fn vocab() -> Vocab {
        let c = [vec!["cat".to_string(), "dog".to_string()]];
        Vocab::build(c.iter().map(Vec::as_slice), 10).unwrap()
    }

    #[test]
    fn copies_known_rows_and_freezes_them() {
        let v = vocab();
        let text = "cat 0.5 -1.25 3\nunseen 1 1 1\n";
        let e = read_embeddings(&v, text.as_bytes(), 3, &mut SeedRng::new(0)).unwrap();
        assert_eq!(e.matrix.shape(), &[v.len(), 3]);
        assert_eq!(e.matrix.row(v.id("cat")), &[0.5, -1.25, 3.0]);
        assert!(e.frozen[v.id("cat")]);
        assert!(!e.frozen[v.id("dog")]);
        assert!(!e.frozen[MASK]);
        assert_eq!(v.token(MASK), Some(MASK_TOKEN));
        assert!(e.matrix.row(v.id("dog")).iter().all(|x| x.abs() < 0.1));
    }

    #[test]
    fn wrong_dimension_reports_line() {
        let v = vocab();
        let text = "cat 1 2 3\ndog 1 2\n";
        match read_embeddings(&v, text.as_bytes(), 3, &mut SeedRng::new(0)) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        match read_embeddings(&v, "cat 1 x 3\n".as_bytes(), 3, &mut SeedRng::new(0)) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn full_glove_width() {
        let v = vocab();
        let row: Vec<String> = (0..GLOVE_DIM)
            .map(|i| format!("{}", i as f64 / 1000.0))
            .collect();
        let text = format!("dog {}\n", row.join(" "));
        let e = read_embeddings(&v, text.as_bytes(), GLOVE_DIM, &mut SeedRng::new(1)).unwrap();
        assert_eq!(e.matrix.shape(), &[v.len(), GLOVE_DIM]);
        assert_eq!(e.matrix.row(v.id("dog"))[299], 0.299);
    }
}
