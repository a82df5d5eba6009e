//! Multilingual QA evaluation (exact match, token F1) and corpus BLEU.
//!
//! Two normalization regimes are supported. `squad` mode reproduces the
//! SQuAD-1.1 evaluator: lowercase, drop ASCII punctuation, drop
//! `a`/`an`/`the`, collapse whitespace, regardless of language. `mlqa` mode
//! takes per-language article lists, punctuation classes and segmentation
//! from a [`ProfileTable`]; Chinese is compared per Han character.

mod bleu;
mod normalize;
mod qa;

pub use bleu::{bleu, corpus_bleu, BleuScore};
pub use normalize::{
    normalize_answer, tokenize_for_f1, EvalMode, LanguageProfile, NormalizationProfile,
    ProfileTable, PunctuationClass, Segmentation,
};
pub use qa::{evaluate_dataset, exact_match, f1, token_f1, EvalOptions, EvalReport, ExampleScore};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("at least one gold answer is required")]
    NoGolds,
    #[error("question {0} has no gold answers")]
    NoGoldsFor(String),
    #[error("{} question(s) have no prediction: {}", .0.len(), .0.join(", "))]
    MissingPredictions(Vec<String>),
    #[error("{hypotheses} hypotheses but {references} references")]
    LengthMismatch {
        hypotheses: usize,
        references: usize,
    },
    #[error("BLEU needs at least one sentence pair")]
    EmptyCorpus,
    #[error("BLEU n-gram order must be >= 1")]
    InvalidOrder,
    #[error("unknown evaluation mode {0:?} (expected squad or mlqa)")]
    UnknownMode(String),
    #[error("no normalization profile for language {0:?}")]
    UnknownLanguage(String),
    #[error("invalid profile configuration: {0}")]
    ProfileConfig(String),
}

/// Splits a sentence into BLEU tokens with the same segmentation F1 uses for
/// `language` (per Han character for Chinese, whitespace otherwise).
pub fn bleu_tokens(sentence: &str, language: &str) -> Vec<String> {
    let seg = if crate::text::uses_han_segmentation(language) {
        Segmentation::PerCharacterMixed
    } else {
        Segmentation::Whitespace
    };
    normalize::segment(sentence, seg)
        .into_iter()
        .map(str::to_owned)
        .collect()
}
