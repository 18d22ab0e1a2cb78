//! Metrics over generated questions.

mod metrics;
mod report;

pub use metrics::{
    answer_inclusion, bleu4, classify_inclusion, interrogative_recall, lcs_len, question_type,
    rouge_l, rouge_l_corpus, stopwords, Inclusion, RecallTable, TypeRecall, QUESTION_TYPES,
    ROUGE_BETA,
};
pub use report::{evaluate, summarize, EvalReport, RunSummary, Spread, TypeEntry};
