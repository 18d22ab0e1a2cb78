//! Passage/answer/question triplets, answer masking and JSONL I/O.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::ner::{ner_replace, MatchingTable, OUTSIDE};
use super::vocab::MASK_TOKEN;
use crate::error::{Error, Result};

/// One pre-tokenized example. `answer_start..answer_end` is a half-open
/// token span into `passage_tokens`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub passage_tokens: Vec<String>,
    pub answer_start: usize,
    pub answer_end: usize,
    pub question_tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ner_tags: Option<Vec<String>>,
}

impl Triplet {
    pub fn validate(&self) -> Result<()> {
        let n = self.passage_tokens.len();
        if self.answer_start >= self.answer_end {
            return Err(Error::invalid(format!(
                "empty answer span [{}, {})",
                self.answer_start, self.answer_end
            )));
        }
        if self.answer_end > n {
            return Err(Error::invalid(format!(
                "answer span [{}, {}) exceeds passage length {n}",
                self.answer_start, self.answer_end
            )));
        }
        if let Some(tags) = &self.ner_tags {
            if tags.len() != n {
                return Err(Error::invalid(format!(
                    "{} NER tags for {n} passage tokens",
                    tags.len()
                )));
            }
        }
        if self.passage_tokens.iter().any(|t| t == MASK_TOKEN) {
            return Err(Error::invalid(
                "passage already contains the answer mask token",
            ));
        }
        Ok(())
    }

    pub fn answer_tokens(&self) -> &[String] {
        &self.passage_tokens[self.answer_start..self.answer_end]
    }
}

/// A triplet after preprocessing: the passage with its answer span replaced
/// by a single mask token, the answer kept apart, and the entity table
/// needed to post-process generated questions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskedTriplet {
    pub masked_passage: Vec<String>,
    pub answer_tokens: Vec<String>,
    pub question_tokens: Vec<String>,
    #[serde(default)]
    pub matching_table: MatchingTable,
}

/// Replaces exactly the designated answer span with one mask token.
pub fn mask_answer(t: &Triplet) -> Result<MaskedTriplet> {
    t.validate()?;
    let mut masked =
        Vec::with_capacity(t.passage_tokens.len() - (t.answer_end - t.answer_start) + 1);
    masked.extend_from_slice(&t.passage_tokens[..t.answer_start]);
    masked.push(MASK_TOKEN.to_string());
    masked.extend_from_slice(&t.passage_tokens[t.answer_end..]);
    Ok(MaskedTriplet {
        masked_passage: masked,
        answer_tokens: t.answer_tokens().to_vec(),
        question_tokens: t.question_tokens.clone(),
        matching_table: MatchingTable::new(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PreprocessOptions {
    /// Replace the answer span with the mask token. Off reproduces the
    /// "no answer masking" ablation: the passage keeps its answer while the
    /// answer side is still extracted.
    pub mask_answer: bool,
    /// Apply entity replacement when the triplet carries NER tags.
    pub replace_entities: bool,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        PreprocessOptions {
            mask_answer: true,
            replace_entities: true,
        }
    }
}

/// Masks the answer, then entity-replaces the remaining passage and rewrites
/// the question's entity mentions with the same table. The answer side keeps
/// its raw tokens.
pub fn preprocess(t: &Triplet, opts: PreprocessOptions) -> Result<MaskedTriplet> {
    t.validate()?;
    let (passage, tags) = if opts.mask_answer {
        let m = mask_answer(t)?;
        let tags = t.ner_tags.as_ref().map(|tags| {
            let mut out = tags[..t.answer_start].to_vec();
            out.push(OUTSIDE.to_string());
            out.extend_from_slice(&tags[t.answer_end..]);
            out
        });
        (m.masked_passage, tags)
    } else {
        (t.passage_tokens.clone(), t.ner_tags.clone())
    };

    let (passage, table) = match tags {
        Some(tags) if opts.replace_entities => ner_replace(&passage, &tags)?,
        _ => (passage, MatchingTable::new()),
    };
    let question = table.substitute_surfaces(&t.question_tokens);
    Ok(MaskedTriplet {
        masked_passage: passage,
        answer_tokens: t.answer_tokens().to_vec(),
        question_tokens: question,
        matching_table: table,
    })
}

/// Reads one triplet per non-blank line. Errors carry the 1-based line.
pub fn read_triplets<R: BufRead>(reader: R) -> Result<Vec<Triplet>> {
    read_jsonl(reader, |t: &Triplet| t.validate())
}

pub fn read_masked<R: BufRead>(reader: R) -> Result<Vec<MaskedTriplet>> {
    read_jsonl(reader, |m: &MaskedTriplet| {
        if m.masked_passage.is_empty() || m.answer_tokens.is_empty() {
            return Err(Error::invalid("empty passage or answer"));
        }
        Ok(())
    })
}

pub(crate) fn read_jsonl<T, R, F>(reader: R, check: F) -> Result<Vec<T>>
where
    T: for<'de> Deserialize<'de>,
    R: BufRead,
    F: Fn(&T) -> Result<()>,
{
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item: T =
            serde_json::from_str(&line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        check(&item).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        out.push(item);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize, W: Write>(mut w: W, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}
