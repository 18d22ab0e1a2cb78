//! Corpus BLEU-4, ROUGE-L, answer inclusion and interrogative recall.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};

/// F-measure weight used by ROUGE-L (recall weighted β² times precision).
pub const ROUGE_BETA: f64 = 1.2;

const STOPWORDS_FILE: &str = include_str!("../../data/stopwords.txt");

/// Function words ignored when looking for partial answer inclusion.
pub fn stopwords() -> Vec<&'static str> {
    STOPWORDS_FILE
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect()
}

fn aligned(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::invalid(format!("{what}: {a} items vs {b}")));
    }
    Ok(())
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w.iter().map(AsRef::as_ref).collect()).or_insert(0) += 1;
        }
    }
    m
}

/// Corpus-level BLEU-4 on a 0-100 scale, one reference per candidate, no
/// smoothing.
pub fn bleu4<S: AsRef<str>>(candidates: &[Vec<S>], references: &[Vec<S>]) -> Result<f64> {
    aligned(candidates.len(), references.len(), "bleu4")?;
    if candidates.is_empty() {
        return Err(Error::invalid("bleu4 on an empty corpus"));
    }
    let mut matched = [0usize; 4];
    let mut total = [0usize; 4];
    let (mut c_len, mut r_len) = (0usize, 0usize);
    for (cand, reference) in candidates.iter().zip(references) {
        c_len += cand.len();
        r_len += reference.len();
        for n in 1..=4 {
            let ref_counts = ngram_counts(reference, n);
            for (gram, count) in ngram_counts(cand, n) {
                matched[n - 1] += count.min(ref_counts.get(&gram).copied().unwrap_or(0));
                total[n - 1] += count;
            }
        }
    }
    if matched.contains(&0) {
        return Ok(0.0);
    }
    let log_mean = (0..4)
        .map(|i| (matched[i] as f64 / total[i] as f64).ln())
        .sum::<f64>()
        / 4.0;
    let bp = if c_len < r_len {
        (1.0 - r_len as f64 / c_len as f64).exp()
    } else {
        1.0
    };
    Ok(100.0 * bp * log_mean.exp())
}

/// Length of the longest common subsequence.
pub fn lcs_len<S: PartialEq>(a: &[S], b: &[S]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// ROUGE-L F-score of one pair, in [0, 1].
pub fn rouge_l<S: AsRef<str>>(candidate: &[S], reference: &[S]) -> Result<f64> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(Error::invalid("rouge_l on an empty sequence"));
    }
    let c: Vec<&str> = candidate.iter().map(AsRef::as_ref).collect();
    let r: Vec<&str> = reference.iter().map(AsRef::as_ref).collect();
    let l = lcs_len(&c, &r) as f64;
    if l == 0.0 {
        return Ok(0.0);
    }
    let p = l / c.len() as f64;
    let rec = l / r.len() as f64;
    let b2 = ROUGE_BETA * ROUGE_BETA;
    Ok((1.0 + b2) * p * rec / (rec + b2 * p))
}

/// Mean ROUGE-L F over pairs, 0-100.
pub fn rouge_l_corpus<S: AsRef<str>>(candidates: &[Vec<S>], references: &[Vec<S>]) -> Result<f64> {
    aligned(candidates.len(), references.len(), "rouge_l")?;
    if candidates.is_empty() {
        return Err(Error::invalid("rouge_l on an empty corpus"));
    }
    let mut sum = 0.0;
    for (c, r) in candidates.iter().zip(references) {
        sum += rouge_l(c, r)?;
    }
    Ok(100.0 * sum / candidates.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Inclusion {
    Complete,
    Partial,
    None,
}

fn contains_run<S: AsRef<str>>(hay: &[S], needle: &[S]) -> bool {
    needle.len() <= hay.len()
        && hay
            .windows(needle.len())
            .any(|w| w.iter().zip(needle).all(|(a, b)| a.as_ref() == b.as_ref()))
}

/// Complete when the whole answer occurs contiguously; partial when some
/// non-stopword answer token occurs but not the whole span.
pub fn classify_inclusion<S: AsRef<str>>(question: &[S], answer: &[S]) -> Result<Inclusion> {
    if answer.is_empty() {
        return Err(Error::invalid("empty answer"));
    }
    if contains_run(question, answer) {
        return Ok(Inclusion::Complete);
    }
    let stop = stopwords();
    let hit = answer
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| !stop.contains(t))
        .any(|t| question.iter().any(|q| q.as_ref() == t));
    Ok(if hit {
        Inclusion::Partial
    } else {
        Inclusion::None
    })
}

/// Percentages of questions with complete and partial answer inclusion.
pub fn answer_inclusion<S: AsRef<str>>(
    questions: &[Vec<S>],
    answers: &[Vec<S>],
) -> Result<(f64, f64)> {
    aligned(questions.len(), answers.len(), "answer_inclusion")?;
    if questions.is_empty() {
        return Err(Error::invalid("answer_inclusion on an empty corpus"));
    }
    let (mut complete, mut partial) = (0usize, 0usize);
    for (q, a) in questions.iter().zip(answers) {
        match classify_inclusion(q, a)? {
            Inclusion::Complete => complete += 1,
            Inclusion::Partial => partial += 1,
            Inclusion::None => {}
        }
    }
    let n = questions.len() as f64;
    Ok((100.0 * complete as f64 / n, 100.0 * partial as f64 / n))
}

/// The eight reported question types, in display order.
pub const QUESTION_TYPES: [&str; 8] = [
    "what", "how", "when", "which", "where", "who", "why", "yes/no",
];

const WH: [&str; 7] = ["what", "how", "when", "which", "where", "who", "why"];
const AUXILIARIES: [&str; 14] = [
    "is", "are", "was", "were", "do", "does", "did", "can", "could", "will", "would", "has",
    "have", "had",
];

/// Question type: the first wh-word anywhere, else yes/no when the question
/// opens with an auxiliary, else `None` ("other").
pub fn question_type<S: AsRef<str>>(question: &[S]) -> Option<&'static str> {
    for t in question {
        let t = t.as_ref().to_lowercase();
        if let Some(w) = WH.iter().find(|w| **w == t) {
            return Some(w);
        }
    }
    let first = question.first()?.as_ref().to_lowercase();
    AUXILIARIES.contains(&first.as_str()).then_some("yes/no")
}

/// Recall of one question type.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TypeRecall {
    /// Gold questions of this type.
    pub gold: usize,
    /// Of those, generated with the same type.
    pub hits: usize,
}

impl TypeRecall {
    /// `None` when no gold question has this type.
    pub fn recall(&self) -> Option<f64> {
        (self.gold > 0).then(|| self.hits as f64 / self.gold as f64)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecallTable {
    pub types: BTreeMap<&'static str, TypeRecall>,
    /// Gold questions outside the eight types.
    pub other: usize,
}

pub fn interrogative_recall<S: AsRef<str>>(
    generated: &[Vec<S>],
    gold: &[Vec<S>],
) -> Result<RecallTable> {
    aligned(generated.len(), gold.len(), "interrogative_recall")?;
    let mut types: BTreeMap<&'static str, TypeRecall> = QUESTION_TYPES
        .iter()
        .map(|t| (*t, TypeRecall { gold: 0, hits: 0 }))
        .collect();
    let mut other = 0;
    for (g, r) in generated.iter().zip(gold) {
        match question_type(r) {
            Some(t) => {
                let e = types.get_mut(t).expect("all types present");
                e.gold += 1;
                if question_type(g) == Some(t) {
                    e.hits += 1;
                }
            }
            None => other += 1,
        }
    }
    Ok(RecallTable { types, other })
}
