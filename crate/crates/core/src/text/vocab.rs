//! Frequency-capped vocabulary shared by passage, answer and question sides.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub const PAD_TOKEN: &str = "〈pad〉";
pub const UNK_TOKEN: &str = "〈unk〉";
pub const SOS_TOKEN: &str = "〈sos〉";
pub const EOS_TOKEN: &str = "〈eos〉";
pub const MASK_TOKEN: &str = "〈a〉";

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const SOS: usize = 2;
pub const EOS: usize = 3;
pub const MASK: usize = 4;

pub const RESERVED: [&str; 5] = [PAD_TOKEN, UNK_TOKEN, SOS_TOKEN, EOS_TOKEN, MASK_TOKEN];

/// Default number of corpus words kept.
pub const DEFAULT_CAP: usize = 34_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    ids: HashMap<String, usize>,
    tokens: Vec<String>,
}

impl Vocab {
    fn reserved_only() -> Self {
        let tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocab { ids, tokens }
    }

    /// Keeps the `cap` most frequent corpus tokens, ties resolved by first
    /// appearance, after the five reserved ids.
    pub fn build<'a, I, S>(corpus: I, cap: usize) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [S]>,
        S: AsRef<str> + 'a,
    {
        if cap == 0 {
            return Err(Error::invalid("vocabulary cap must be at least 1"));
        }
        let mut counts: HashMap<&str, (usize, usize)> = HashMap::new();
        let mut next = 0;
        for seq in corpus {
            for tok in seq {
                let tok = tok.as_ref();
                if RESERVED.contains(&tok) {
                    continue;
                }
                let e = counts.entry(tok).or_insert_with(|| {
                    next += 1;
                    (0, next)
                });
                e.0 += 1;
            }
        }
        let mut ranked: Vec<(&str, usize, usize)> = counts
            .into_iter()
            .map(|(t, (c, first))| (t, c, first))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));

        let mut v = Vocab::reserved_only();
        for (tok, _, _) in ranked.into_iter().take(cap) {
            v.ids.insert(tok.to_string(), v.tokens.len());
            v.tokens.push(tok.to_string());
        }
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.ids.get(token).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.ids.contains_key(token)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    /// Maps ids back to tokens, dropping nothing. Unknown ids are an error.
    pub fn decode(&self, ids: &[usize]) -> Result<Vec<String>> {
        ids.iter()
            .map(|&i| {
                self.token(i)
                    .map(str::to_string)
                    .ok_or(Error::UnknownToken(i))
            })
            .collect()
    }

    /// One token per line in id order.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        for t in &self.tokens {
            writeln!(w, "{t}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut v = Vocab {
            ids: HashMap::new(),
            tokens: Vec::new(),
        };
        for (i, line) in r.lines().enumerate() {
            let tok = line?;
            if i < RESERVED.len() && tok != RESERVED[i] {
                return Err(Error::parse(
                    i + 1,
                    format!("expected reserved token {}", RESERVED[i]),
                ));
            }
            if v.ids.insert(tok.clone(), i).is_some() {
                return Err(Error::parse(i + 1, format!("duplicate token {tok:?}")));
            }
            v.tokens.push(tok);
        }
        if v.tokens.len() < RESERVED.len() {
            return Err(Error::parse(v.tokens.len() + 1, "missing reserved tokens"));
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus(lines: &[&str]) -> Vec<Vec<String>> {
        lines
            .iter()
            .map(|l| l.split_whitespace().map(str::to_string).collect())
            .collect()
    }

    #[test]
    fn reserved_ids_fixed() {
        let v = Vocab::build(Vec::<&[String]>::new(), 10).unwrap();
        assert_eq!(v.len(), 5);
        for (i, t) in RESERVED.iter().enumerate() {
            assert_eq!(v.id(t), i);
        }
    }

    #[test]
    fn small_corpus_fully_included() {
        let c = corpus(&["the cat sat", "the dog"]);
        let v = Vocab::build(c.iter().map(Vec::as_slice), 100).unwrap();
        assert_eq!(v.len(), 5 + 4);
        assert_eq!(v.token(5), Some("the"));
    }

    #[test]
    fn cap_keeps_most_frequent() {
        let c = corpus(&["a a b"]);
        let v = Vocab::build(c.iter().map(Vec::as_slice), 1).unwrap();
        assert!(v.contains("a"));
        assert!(!v.contains("b"));
        assert_eq!(v.id("b"), UNK);
    }

    #[test]
    fn ties_by_first_occurrence() {
        let c = corpus(&["z y x", "x y z"]);
        let v = Vocab::build(c.iter().map(Vec::as_slice), 2).unwrap();
        assert_eq!(v.tokens()[5..], ["z".to_string(), "y".to_string()]);
    }

    #[test]
    fn bijection_and_file_round_trip() {
        let c = corpus(&["b a c a", "d 〈a〉"]);
        let v = Vocab::build(c.iter().map(Vec::as_slice), 10).unwrap();
        for id in 0..v.len() {
            assert_eq!(v.id(v.token(id).unwrap()), id);
        }
        let mut buf = Vec::new();
        v.write(&mut buf).unwrap();
        assert_eq!(Vocab::read(buf.as_slice()).unwrap(), v);
    }
}
