use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::Passage;
use crate::parsefilter::SyntheticExample;

pub const SQUAD_VERSION: &str = "1.1";

/// SQuAD-1.1 document. Field order here is the emitted key order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SquadDataset {
    pub version: String,
    #[serde(rename = "data")]
    pub articles: Vec<Article>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub title: String,
    pub paragraphs: Vec<Paragraph>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub context: String,
    pub qas: Vec<Qa>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Qa {
    pub id: String,
    pub question: String,
    pub answers: Vec<Answer>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub text: String,
    pub answer_start: usize,
}

impl SquadDataset {
    pub fn empty() -> Self {
        Self {
            version: SQUAD_VERSION.to_owned(),
            articles: Vec::new(),
        }
    }

    pub fn qas(&self) -> impl Iterator<Item = (&Paragraph, &Qa)> {
        self.articles
            .iter()
            .flat_map(|a| a.paragraphs.iter())
            .flat_map(|p| p.qas.iter().map(move |qa| (p, qa)))
    }

    pub fn qa_count(&self) -> usize {
        self.qas().count()
    }

    /// Compact JSON followed by a newline. Identical datasets always
    /// produce identical bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec(self).expect("dataset serialization is infallible");
        out.push(b'\n');
        out
    }

    pub fn write_to<W: Write>(&self, mut writer: W) -> std::io::Result<()> {
        writer.write_all(&self.to_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    /// `context[answer_start..]` does not spell the answer text.
    SpanMismatch {
        answer_index: usize,
        found: String,
    },
    /// `answer_start + len(text)` runs past the end of the context.
    SpanOutOfRange {
        answer_index: usize,
    },
    DuplicateId,
    NoAnswers,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub qa_id: String,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ViolationKind::SpanMismatch {
                answer_index,
                found,
            } => write!(
                f,
                "qa {}: answer {answer_index} does not match context (found {found:?})",
                self.qa_id
            ),
            ViolationKind::SpanOutOfRange { answer_index } => write!(
                f,
                "qa {}: answer {answer_index} extends past the end of the context",
                self.qa_id
            ),
            ViolationKind::DuplicateId => write!(f, "qa {}: duplicate id", self.qa_id),
            ViolationKind::NoAnswers => write!(f, "qa {}: no answers", self.qa_id),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks answer spans and id uniqueness.
pub fn validate(dataset: &SquadDataset) -> ValidationReport {
    let mut violations = Vec::new();
    let mut seen = HashSet::new();
    for (paragraph, qa) in dataset.qas() {
        if !seen.insert(qa.id.as_str()) {
            violations.push(Violation {
                qa_id: qa.id.clone(),
                kind: ViolationKind::DuplicateId,
            });
        }
        if qa.answers.is_empty() {
            violations.push(Violation {
                qa_id: qa.id.clone(),
                kind: ViolationKind::NoAnswers,
            });
        }
        let context_len = paragraph.context.chars().count();
        for (answer_index, answer) in qa.answers.iter().enumerate() {
            let len = answer.text.chars().count();
            if answer.answer_start + len > context_len {
                violations.push(Violation {
                    qa_id: qa.id.clone(),
                    kind: ViolationKind::SpanOutOfRange { answer_index },
                });
                continue;
            }
            let found: String = paragraph
                .context
                .chars()
                .skip(answer.answer_start)
                .take(len)
                .collect();
            if found != answer.text {
                violations.push(Violation {
                    qa_id: qa.id.clone(),
                    kind: ViolationKind::SpanMismatch {
                        answer_index,
                        found,
                    },
                });
            }
        }
    }
    ValidationReport { violations }
}

#[derive(Debug, Error)]
pub enum ReadError {
    #[error("malformed SQuAD document at {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

/// A parsed document together with its span/id validation outcome.
#[derive(Debug, Clone)]
pub struct SquadRead {
    pub dataset: SquadDataset,
    pub report: ValidationReport,
}

/// Parses a SQuAD document. Structural problems are errors carrying the JSON
/// path; span and id problems are collected in the report.
pub fn read_squad<R: Read>(reader: R) -> Result<SquadRead, ReadError> {
    let mut de = serde_json::Deserializer::from_reader(reader);
    let dataset: SquadDataset =
        serde_path_to_error::deserialize(&mut de).map_err(|e| ReadError::Parse {
            path: e.path().to_string(),
            source: e.into_inner(),
        })?;
    de.end().map_err(|e| ReadError::Parse {
        path: ".".into(),
        source: e,
    })?;
    let report = validate(&dataset);
    Ok(SquadRead { dataset, report })
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EmitError {
    #[error("example {question:?} refers to unknown passage {passage_id:?}")]
    UnknownPassage {
        passage_id: String,
        question: String,
    },
    #[error("example {question:?} on passage {passage_id:?}: answer {answer:?} is not located in the passage")]
    NotExtractive {
        passage_id: String,
        question: String,
        answer: String,
    },
}

/// Anything that resolves passage ids.
pub trait PassageLookup {
    fn passage(&self, id: &str) -> Option<&Passage>;
}

impl PassageLookup for HashMap<String, Passage> {
    fn passage(&self, id: &str) -> Option<&Passage> {
        self.get(id)
    }
}

impl PassageLookup for BTreeMap<String, Passage> {
    fn passage(&self, id: &str) -> Option<&Passage> {
        self.get(id)
    }
}

impl PassageLookup for [Passage] {
    fn passage(&self, id: &str) -> Option<&Passage> {
        self.iter().find(|p| p.id() == id)
    }
}

/// Content-derived qa id: first 24 hex digits of
/// SHA-256(passage_id ␟ question ␟ answer).
pub fn qa_id(passage_id: &str, question: &str, answer: &str) -> String {
    let mut hasher = Sha256::new();
    for (i, part) in [passage_id, question, answer].into_iter().enumerate() {
        if i > 0 {
            hasher.update([0x1f]);
        }
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    hex::encode(&digest[..12])
}

/// Groups examples into a SQuAD document: one article and one paragraph per
/// passage (title = passage id), articles sorted by passage id and qas by id.
///
/// Exact repeats of a `(passage, question, answer)` triple share a hash;
/// the second and later copies get `-1`, `-2`, … suffixes.
pub fn emit_squad<L>(examples: &[SyntheticExample], passages: &L) -> Result<SquadDataset, EmitError>
where
    L: PassageLookup + ?Sized,
{
    let mut grouped: BTreeMap<&str, (&Passage, Vec<Qa>)> = BTreeMap::new();
    for ex in examples {
        let passage =
            passages
                .passage(&ex.passage_id)
                .ok_or_else(|| EmitError::UnknownPassage {
                    passage_id: ex.passage_id.clone(),
                    question: ex.question.clone(),
                })?;
        let answer_start = ex
            .answer_start
            .filter(|_| ex.span_matches(passage.text()))
            .ok_or_else(|| EmitError::NotExtractive {
                passage_id: ex.passage_id.clone(),
                question: ex.question.clone(),
                answer: ex.answer.clone(),
            })?;
        grouped
            .entry(passage.id())
            .or_insert_with(|| (passage, Vec::new()))
            .1
            .push(Qa {
                id: qa_id(&ex.passage_id, &ex.question, &ex.answer),
                question: ex.question.clone(),
                answers: vec![Answer {
                    text: ex.answer.clone(),
                    answer_start,
                }],
            });
    }

    let articles = grouped
        .into_values()
        .map(|(passage, mut qas)| {
            qas.sort_by(|a, b| a.id.cmp(&b.id));
            let mut base: Option<String> = None;
            let mut repeats = 0;
            for qa in &mut qas {
                if base.as_deref() == Some(qa.id.as_str()) {
                    repeats += 1;
                    qa.id = format!("{}-{repeats}", qa.id);
                } else {
                    base = Some(qa.id.clone());
                    repeats = 0;
                }
            }
            Article {
                title: passage.id().to_owned(),
                paragraphs: vec![Paragraph {
                    context: passage.text().to_owned(),
                    qas,
                }],
            }
        })
        .collect();
    Ok(SquadDataset {
        version: SQUAD_VERSION.to_owned(),
        articles,
    })
}
