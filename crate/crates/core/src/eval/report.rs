//! Aggregated evaluation report.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::{
    answer_inclusion, bleu4, interrogative_recall, rouge_l_corpus, QUESTION_TYPES,
};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeEntry {
    /// Percentage; `None` when the gold side has no question of this type.
    pub recall: Option<f64>,
    pub gold: usize,
    pub hits: usize,
}

/// All scores on a 0-100 scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub examples: usize,
    pub bleu4: f64,
    pub rouge_l: f64,
    /// Not computed; always "n/a".
    pub meteor: String,
    pub complete_inclusion_pct: f64,
    pub partial_inclusion_pct: f64,
    pub recall: BTreeMap<String, TypeEntry>,
    /// Gold questions that fall outside the eight types.
    pub other_questions: usize,
}

fn lower(corpus: &[Vec<String>]) -> Vec<Vec<String>> {
    corpus
        .iter()
        .map(|q| q.iter().map(|t| t.to_lowercase()).collect())
        .collect()
}

/// Scores generated questions against gold questions and target answers.
/// Tokens are compared lowercased.
pub fn evaluate(
    generated: &[Vec<String>],
    gold: &[Vec<String>],
    answers: &[Vec<String>],
) -> Result<EvalReport> {
    if generated.len() != gold.len() || gold.len() != answers.len() {
        return Err(Error::invalid(format!(
            "misaligned inputs: {} generated, {} gold, {} answers",
            generated.len(),
            gold.len(),
            answers.len()
        )));
    }
    let (gen, gold, answers) = (lower(generated), lower(gold), lower(answers));
    // An empty generation scores zero ROUGE-L rather than failing the run.
    let gen_nonempty: Vec<Vec<String>> = gen
        .iter()
        .map(|g| {
            if g.is_empty() {
                vec![String::new()]
            } else {
                g.clone()
            }
        })
        .collect();
    let (complete, partial) = answer_inclusion(&gen, &answers)?;
    let table = interrogative_recall(&gen, &gold)?;
    let recall = QUESTION_TYPES
        .iter()
        .map(|t| {
            let r = table.types[t];
            (
                t.to_string(),
                TypeEntry {
                    recall: r.recall().map(|x| 100.0 * x),
                    gold: r.gold,
                    hits: r.hits,
                },
            )
        })
        .collect();
    Ok(EvalReport {
        examples: gen.len(),
        bleu4: bleu4(&gen, &gold)?,
        rouge_l: rouge_l_corpus(&gen_nonempty, &gold)?,
        meteor: "n/a".into(),
        complete_inclusion_pct: complete,
        partial_inclusion_pct: partial,
        recall,
        other_questions: table.other,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Aligned two-column plain-text table.
    pub fn to_table(&self) -> String {
        let mut rows: Vec<(String, String)> = vec![
            ("examples".into(), self.examples.to_string()),
            ("BLEU-4".into(), format!("{:.2}", self.bleu4)),
            ("ROUGE-L".into(), format!("{:.2}", self.rouge_l)),
            ("METEOR".into(), self.meteor.clone()),
            (
                "answer complete %".into(),
                format!("{:.2}", self.complete_inclusion_pct),
            ),
            (
                "answer partial %".into(),
                format!("{:.2}", self.partial_inclusion_pct),
            ),
        ];
        for t in QUESTION_TYPES {
            let e = &self.recall[t];
            let v = match e.recall {
                Some(r) => format!("{r:.2} ({}/{})", e.hits, e.gold),
                None => "n/a (0/0)".into(),
            };
            rows.push((format!("recall {t}"), v));
        }
        rows.push(("other questions".into(), self.other_questions.to_string()));
        let width = rows
            .iter()
            .map(|(k, _)| k.chars().count())
            .max()
            .unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v}");
        }
        out
    }
}

/// Mean and sample standard deviation of one metric over several runs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
}

impl Spread {
    /// `None` for an empty slice. One value has std 0.
    pub fn of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            (ss / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(Spread { mean, std, runs: n })
    }
}

/// Reports of repeated runs (different seeds) folded into mean ± std.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub runs: usize,
    pub bleu4: Spread,
    pub rouge_l: Spread,
    pub complete_inclusion_pct: Spread,
    pub partial_inclusion_pct: Spread,
    /// Runs whose gold side has no question of a type are left out of
    /// that type's spread; a type absent everywhere is `None`.
    pub recall: BTreeMap<String, Option<Spread>>,
}

pub fn summarize(reports: &[EvalReport]) -> Result<RunSummary> {
    if reports.is_empty() {
        return Err(Error::invalid("no reports to summarize"));
    }
    let field = |f: fn(&EvalReport) -> f64| {
        let v: Vec<f64> = reports.iter().map(f).collect();
        Spread::of(&v).expect("non-empty")
    };
    let mut recall = BTreeMap::new();
    for t in QUESTION_TYPES {
        let v: Vec<f64> = reports
            .iter()
            .filter_map(|r| r.recall.get(t).and_then(|e| e.recall))
            .collect();
        recall.insert(t.to_string(), Spread::of(&v));
    }
    Ok(RunSummary {
        runs: reports.len(),
        bleu4: field(|r| r.bleu4),
        rouge_l: field(|r| r.rouge_l),
        complete_inclusion_pct: field(|r| r.complete_inclusion_pct),
        partial_inclusion_pct: field(|r| r.partial_inclusion_pct),
        recall,
    })
}

impl RunSummary {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `metric  mean ± std` rows.
    pub fn to_table(&self) -> String {
        let fmt = |s: &Spread| format!("{:.2} ± {:.2}", s.mean, s.std);
        let mut rows: Vec<(String, String)> = vec![
            ("runs".into(), self.runs.to_string()),
            ("BLEU-4".into(), fmt(&self.bleu4)),
            ("ROUGE-L".into(), fmt(&self.rouge_l)),
            (
                "answer complete %".into(),
                fmt(&self.complete_inclusion_pct),
            ),
            ("answer partial %".into(), fmt(&self.partial_inclusion_pct)),
        ];
        for t in QUESTION_TYPES {
            let v = match &self.recall[t] {
                Some(s) => format!("{} (runs {})", fmt(s), s.runs),
                None => "n/a".into(),
            };
            rows.push((format!("recall {t}"), v));
        }
        let width = rows
            .iter()
            .map(|(k, _)| k.chars().count())
            .max()
            .unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v}");
        }
        out
    }
}
