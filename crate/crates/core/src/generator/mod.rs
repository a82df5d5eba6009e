//! Conditional question+answer generators.
//!
//! A generator receives a passage and returns `num_samples` decoded
//! sequences of the form `question <Q> answer <A>`, each paired with the
//! log-probability the generator assigned to it. Two backends ship here: an
//! add-one-smoothed n-gram model trained in-process ([`ReferenceBackend`])
//! and an HTTP client for an external inference service
//! ([`RemoteGenerator`]).

mod reference;
mod remote;

pub use reference::{
    train_reference, ReferenceBackend, ReferenceConfig, TrainingExample, END_OF_SEQUENCE,
    UNKNOWN_TOKEN,
};
pub use remote::{RemoteGenerator, RetryPolicy, GENERATOR_URL_ENV};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const QUESTION_MARKER: &str = "question";
pub const ANSWER_MARKER: &str = "answer";

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("invalid generation request: {0}")]
    InvalidRequest(String),
    #[error("{0} must not be empty")]
    EmptyField(&'static str),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Transport(#[from] TransportError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportErrorKind {
    /// Connection refused, DNS failure, timeout and the like.
    Unreachable,
    /// The service answered with a non-success status.
    Status(u16),
    /// The service answered but the body broke the wire contract.
    Protocol,
}

impl TransportErrorKind {
    pub fn is_retryable(self) -> bool {
        match self {
            Self::Unreachable => true,
            Self::Status(code) => code == 429 || code >= 500,
            Self::Protocol => false,
        }
    }
}

/// Failure talking to a remote generator, after all retries were spent.
#[derive(Debug, Clone, Error)]
#[error("generator transport failed after {attempts} attempt(s) ({kind:?}): {message}")]
pub struct TransportError {
    pub kind: TransportErrorKind,
    pub attempts: u32,
    pub message: String,
}

/// One generation call. This struct is also the remote wire request body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub passage: String,
    pub language: String,
    pub num_samples: usize,
    pub top_k: usize,
    pub max_output_tokens: usize,
    /// Cross-lingual mode: the language the question must be produced in.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_language: Option<String>,
    /// Pre-specified answer, forwarded to the backend untouched. Only
    /// answer-conditioned question generators make use of it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
}

impl GenerationRequest {
    pub fn new(passage: impl Into<String>, language: impl Into<String>) -> Self {
        Self {
            passage: passage.into(),
            language: language.into(),
            num_samples: 20,
            top_k: 10,
            max_output_tokens: 64,
            target_language: None,
            answer: None,
        }
    }

    pub fn validate(&self) -> Result<(), GeneratorError> {
        if self.num_samples == 0 {
            return Err(GeneratorError::InvalidRequest(
                "num_samples must be >= 1".into(),
            ));
        }
        if self.top_k == 0 {
            return Err(GeneratorError::InvalidRequest("top_k must be >= 1".into()));
        }
        if self.max_output_tokens == 0 {
            return Err(GeneratorError::InvalidRequest(
                "max_output_tokens must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// A raw decoded sequence and its total log-probability (natural log).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub text: String,
    pub lm_score: f64,
}

pub trait Generator: Send + Sync {
    /// Samples exactly `request.num_samples` candidates. `seed` drives every
    /// stochastic choice of backends that sample locally.
    fn generate(
        &self,
        request: &GenerationRequest,
        seed: u64,
    ) -> Result<Vec<Candidate>, GeneratorError>;
}

/// Builds the decoder target `question <q> answer <a>`.
pub fn format_target(question: &str, answer: &str) -> Result<String, GeneratorError> {
    if question.trim().is_empty() {
        return Err(GeneratorError::EmptyField("question"));
    }
    if answer.trim().is_empty() {
        return Err(GeneratorError::EmptyField("answer"));
    }
    Ok(format!(
        "{QUESTION_MARKER} {question} {ANSWER_MARKER} {answer}"
    ))
}

/// Per-passage seed, so that results do not depend on scheduling order.
pub fn derive_seed(global_seed: u64, passage_id: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(global_seed.to_le_bytes());
    hasher.update(passage_id.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}
