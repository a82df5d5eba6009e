//! Passage ingestion: streaming record parsing, token counting, length
//! filtering and seeded subsampling.
//!
//! Passages arrive as one JSON object per line with `id`, `text` and
//! `language` fields. Text is NFC-normalized on construction so that later
//! substring checks against generated answers are well defined.

use std::collections::HashSet;
use std::io::BufRead;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PassageError {
    #[error("passage text is empty")]
    EmptyText,
    #[error("passage id is empty")]
    EmptyId,
    #[error("passage language is empty")]
    EmptyLanguage,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CorpusError {
    #[error("invalid length bounds: need 0 < min ({min}) <= max ({max})")]
    InvalidBounds { min: usize, max: usize },
}

/// Why a single ingestion record was rejected.
#[derive(Debug, Error)]
pub enum RecordErrorKind {
    #[error("malformed record: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] PassageError),
    #[error("duplicate passage id {0:?}")]
    DuplicateId(String),
    #[error("read failed: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
#[error("line {line}: {kind}")]
pub struct RecordError {
    pub line: usize,
    pub kind: RecordErrorKind,
}

/// Number of tokens in `text` for length filtering.
///
/// Chinese text counts each Han character as one token and splits the
/// remaining runs on whitespace; every other language counts maximal
/// non-whitespace runs.
pub fn count_tokens(text: &str, language: &str) -> usize {
    if text::uses_han_segmentation(language) {
        text::split_mixed(text).count()
    } else {
        text.split_whitespace().count()
    }
}

/// A source paragraph. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PassageRecord")]
pub struct Passage {
    id: String,
    text: String,
    language: String,
    token_count: usize,
}

impl Passage {
    pub fn new(
        id: impl Into<String>,
        text: &str,
        language: impl Into<String>,
    ) -> Result<Self, PassageError> {
        let id = id.into();
        let language = language.into();
        if id.is_empty() {
            return Err(PassageError::EmptyId);
        }
        if language.trim().is_empty() {
            return Err(PassageError::EmptyLanguage);
        }
        let text = text::nfc(text).into_owned();
        if text.trim().is_empty() {
            return Err(PassageError::EmptyText);
        }
        let token_count = count_tokens(&text, &language);
        Ok(Self {
            id,
            text,
            language,
            token_count,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn language(&self) -> &str {
        &self.language
    }

    pub fn token_count(&self) -> usize {
        self.token_count
    }
}

/// Wire form of a passage record. Any `token_count` present in the input is
/// ignored and recomputed.
#[derive(Debug, Deserialize)]
struct PassageRecord {
    id: String,
    text: String,
    language: String,
}

impl TryFrom<PassageRecord> for Passage {
    type Error = PassageError;

    fn try_from(rec: PassageRecord) -> Result<Self, Self::Error> {
        Passage::new(rec.id, &rec.text, rec.language)
    }
}

/// Inclusive token-count bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthBounds {
    min: usize,
    max: usize,
}

impl LengthBounds {
    pub fn new(min: usize, max: usize) -> Result<Self, CorpusError> {
        if min == 0 || min > max {
            return Err(CorpusError::InvalidBounds { min, max });
        }
        Ok(Self { min, max })
    }

    pub fn min(&self) -> usize {
        self.min
    }

    pub fn max(&self) -> usize {
        self.max
    }

    pub fn contains(&self, token_count: usize) -> bool {
        (self.min..=self.max).contains(&token_count)
    }
}

impl Default for LengthBounds {
    fn default() -> Self {
        Self { min: 30, max: 450 }
    }
}

pub fn filter_by_length<I>(passages: I, bounds: LengthBounds) -> impl Iterator<Item = Passage>
where
    I: IntoIterator<Item = Passage>,
{
    passages
        .into_iter()
        .filter(move |p| bounds.contains(p.token_count()))
}

/// Draws `min(n, passages.len())` distinct passages uniformly without
/// replacement. The result is a pure function of `(passages, n, seed)`.
pub fn sample_passages(passages: &[Passage], n: usize, seed: u64) -> Vec<Passage> {
    let amount = n.min(passages.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rand::seq::index::sample(&mut rng, passages.len(), amount)
        .into_iter()
        .map(|i| passages[i].clone())
        .collect()
}

/// Streams passages from line-oriented JSON records.
///
/// Blank lines are skipped. A bad record yields an `Err` carrying its
/// 1-based line number and the stream carries on with the next line.
pub fn parse_passage_stream<R: BufRead>(reader: R) -> PassageStream<R> {
    PassageStream {
        reader,
        line_no: 0,
        buf: String::new(),
        seen: HashSet::new(),
        errors: 0,
    }
}

pub struct PassageStream<R> {
    reader: R,
    line_no: usize,
    buf: String,
    seen: HashSet<String>,
    errors: usize,
}

impl<R> PassageStream<R> {
    /// Records rejected so far.
    pub fn error_count(&self) -> usize {
        self.errors
    }

    fn reject(&mut self, kind: RecordErrorKind) -> RecordError {
        self.errors += 1;
        RecordError {
            line: self.line_no,
            kind,
        }
    }
}

impl<R: BufRead> Iterator for PassageStream<R> {
    type Item = Result<Passage, RecordError>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.buf.clear();
            self.line_no += 1;
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(self.reject(e.into()))),
            }
            let line = self.buf.trim();
            if line.is_empty() {
                continue;
            }
            let rec: PassageRecord = match serde_json::from_str(line) {
                Ok(rec) => rec,
                Err(e) => return Some(Err(self.reject(e.into()))),
            };
            let passage = match Passage::try_from(rec) {
                Ok(p) => p,
                Err(e) => return Some(Err(self.reject(e.into()))),
            };
            if !self.seen.insert(passage.id.clone()) {
                return Some(Err(self.reject(RecordErrorKind::DuplicateId(passage.id))));
            }
            return Some(Ok(passage));
        }
    }
}
