//! Turning raw generator output into validated synthetic examples.
//!
//! Per passage the pipeline is: parse `question … answer …` →
//! extractiveness check → exact-duplicate removal → keep the top `m` by
//! LM score.

use std::collections::HashMap;
use std::ops::AddAssign;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Passage;
use crate::generator::{Candidate, ANSWER_MARKER, QUESTION_MARKER};
use crate::text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum StructuralFailure {
    #[error("missing leading \"question\" marker")]
    MissingQuestionMarker,
    #[error("missing \"answer\" marker")]
    MissingAnswerMarker,
    #[error("empty question")]
    EmptyQuestion,
    #[error("empty answer")]
    EmptyAnswer,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QAPair {
    question: String,
    answer: String,
}

impl QAPair {
    pub fn new(
        question: impl Into<String>,
        answer: impl Into<String>,
    ) -> Result<Self, StructuralFailure> {
        let question = question.into();
        let answer = answer.into();
        if question.trim().is_empty() {
            return Err(StructuralFailure::EmptyQuestion);
        }
        if answer.trim().is_empty() {
            return Err(StructuralFailure::EmptyAnswer);
        }
        Ok(Self { question, answer })
    }

    pub fn question(&self) -> &str {
        &self.question
    }

    pub fn answer(&self) -> &str {
        &self.answer
    }
}

/// Splits a decoded sequence at its markers.
///
/// The text must open with the standalone token `question`; the answer is
/// everything after the first later standalone `answer` token. A question
/// that itself contains the word "answer" is therefore cut short.
pub fn parse_candidate(text: &str) -> Result<QAPair, StructuralFailure> {
    let mut tokens = text::token_spans(text);
    let question_end = match tokens.next() {
        Some((start, tok)) if tok == QUESTION_MARKER => start + tok.len(),
        _ => return Err(StructuralFailure::MissingQuestionMarker),
    };
    let (answer_start, answer_end) = tokens
        .find(|(_, tok)| *tok == ANSWER_MARKER)
        .map(|(start, tok)| (start, start + tok.len()))
        .ok_or(StructuralFailure::MissingAnswerMarker)?;
    QAPair::new(
        text[question_end..answer_start].trim(),
        text[answer_end..].trim(),
    )
}

/// Character offset of the first exact occurrence of `answer` in `passage`.
pub fn check_extractive(answer: &str, passage: &str) -> Option<usize> {
    if answer.is_empty() {
        return None;
    }
    passage
        .find(answer)
        .map(|byte| passage[..byte].chars().count())
}

/// Keeps the `m` highest-scored items, best first. Equal scores keep their
/// input order.
pub fn lm_filter<T>(mut candidates: Vec<(T, f64)>, m: usize) -> Vec<(T, f64)> {
    // stable sort: ties stay in input order
    candidates.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    candidates.truncate(m);
    candidates
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub samples_per_passage: usize,
    pub keep_per_passage: usize,
    pub require_extractive: bool,
    pub dedup: bool,
    /// Rank by per-token rather than total log-probability.
    pub length_normalize: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            samples_per_passage: 20,
            keep_per_passage: 10,
            require_extractive: true,
            dedup: true,
            length_normalize: false,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FilterConfigError {
    #[error("samples_per_passage and keep_per_passage must be >= 1")]
    Zero,
    #[error("keep_per_passage ({keep}) exceeds samples_per_passage ({samples})")]
    KeepExceedsSamples { keep: usize, samples: usize },
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), FilterConfigError> {
        if self.samples_per_passage == 0 || self.keep_per_passage == 0 {
            return Err(FilterConfigError::Zero);
        }
        if self.keep_per_passage > self.samples_per_passage {
            return Err(FilterConfigError::KeepExceedsSamples {
                keep: self.keep_per_passage,
                samples: self.samples_per_passage,
            });
        }
        Ok(())
    }
}

/// A filtered question/answer pair bound to its passage.
///
/// `answer_start` is the character offset of the answer in the passage text.
/// It is absent only when extractiveness was not required and the answer
/// does not occur in the passage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticExample {
    pub passage_id: String,
    pub question: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_start: Option<usize>,
    pub lm_score: f64,
    pub language: String,
}

impl SyntheticExample {
    /// True when `answer_start` locates `answer` in `passage_text`.
    pub fn span_matches(&self, passage_text: &str) -> bool {
        let Some(start) = self.answer_start else {
            return false;
        };
        let len = self.answer.chars().count();
        passage_text
            .chars()
            .skip(start)
            .take(len)
            .eq(self.answer.chars())
    }
}

/// Per-stage survivor counts plus the reasons candidates failed to parse.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterStats {
    pub candidates: usize,
    pub parsed: usize,
    pub extractive: usize,
    pub deduped: usize,
    pub kept: usize,
    pub missing_question: usize,
    pub missing_answer: usize,
    pub empty_question: usize,
    pub empty_answer: usize,
}

impl FilterStats {
    fn record_failure(&mut self, failure: StructuralFailure) {
        match failure {
            StructuralFailure::MissingQuestionMarker => self.missing_question += 1,
            StructuralFailure::MissingAnswerMarker => self.missing_answer += 1,
            StructuralFailure::EmptyQuestion => self.empty_question += 1,
            StructuralFailure::EmptyAnswer => self.empty_answer += 1,
        }
    }
}

impl AddAssign for FilterStats {
    fn add_assign(&mut self, rhs: Self) {
        self.candidates += rhs.candidates;
        self.parsed += rhs.parsed;
        self.extractive += rhs.extractive;
        self.deduped += rhs.deduped;
        self.kept += rhs.kept;
        self.missing_question += rhs.missing_question;
        self.missing_answer += rhs.missing_answer;
        self.empty_question += rhs.empty_question;
        self.empty_answer += rhs.empty_answer;
    }
}

struct Parsed {
    pair: QAPair,
    start: Option<usize>,
    score: f64,
}

pub fn run_filter_pipeline(
    passage: &Passage,
    candidates: &[Candidate],
    config: &FilterConfig,
) -> (Vec<SyntheticExample>, FilterStats) {
    let mut stats = FilterStats {
        candidates: candidates.len(),
        ..FilterStats::default()
    };

    let mut parsed = Vec::with_capacity(candidates.len());
    for cand in candidates {
        match parse_candidate(&cand.text) {
            Ok(pair) => {
                let pair = QAPair {
                    question: text::nfc(pair.question()).into_owned(),
                    answer: text::nfc(pair.answer()).into_owned(),
                };
                let score = if config.length_normalize {
                    cand.lm_score / cand.text.split_whitespace().count() as f64
                } else {
                    cand.lm_score
                };
                parsed.push(Parsed {
                    pair,
                    start: None,
                    score,
                });
            }
            Err(failure) => stats.record_failure(failure),
        }
    }
    stats.parsed = parsed.len();

    for p in &mut parsed {
        p.start = check_extractive(p.pair.answer(), passage.text());
    }
    if config.require_extractive {
        parsed.retain(|p| p.start.is_some());
    }
    stats.extractive = parsed.len();

    if config.dedup {
        parsed = dedup_keep_best(parsed);
    }
    stats.deduped = parsed.len();

    let ranked = lm_filter(
        parsed
            .into_iter()
            .map(|p| {
                let score = p.score;
                (p, score)
            })
            .collect(),
        config.keep_per_passage,
    );
    stats.kept = ranked.len();

    let examples = ranked
        .into_iter()
        .map(|(p, score)| SyntheticExample {
            passage_id: passage.id().to_owned(),
            question: p.pair.question,
            answer: p.pair.answer,
            answer_start: p.start,
            lm_score: score,
            language: passage.language().to_owned(),
        })
        .collect();
    (examples, stats)
}

/// Collapses exact `(question, answer)` duplicates onto their best-scored
/// instance (earliest among equals), keeping survivors in input order.
fn dedup_keep_best(parsed: Vec<Parsed>) -> Vec<Parsed> {
    let mut best: HashMap<&QAPair, usize> = HashMap::new();
    for (i, p) in parsed.iter().enumerate() {
        best.entry(&p.pair)
            .and_modify(|j| {
                if p.score > parsed[*j].score {
                    *j = i;
                }
            })
            .or_insert(i);
    }
    let mut keep = vec![false; parsed.len()];
    for &i in best.values() {
        keep[i] = true;
    }
    parsed
        .into_iter()
        .zip(keep)
        .filter_map(|(p, k)| k.then_some(p))
        .collect()
}
