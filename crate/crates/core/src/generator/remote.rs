//! HTTP client for an external generation service.
//!
//! `POST <base>/generate` with a [`GenerationRequest`] body; the service
//! replies `{"candidates": [{"text": ..., "lm_score": ...}, ...]}`.
//! Connection failures and 429/5xx replies are retried with exponential
//! backoff. Malformed replies are protocol violations and fail at once.

use std::thread;
use std::time::Duration;

use serde::Deserialize;

use super::{
    Candidate, GenerationRequest, Generator, GeneratorError, TransportError, TransportErrorKind,
};

pub const GENERATOR_URL_ENV: &str = "QAFORGE_GENERATOR_URL";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub multiplier: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            initial_backoff: Duration::from_millis(500),
            multiplier: 2.0,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (1-based).
    pub fn backoff(&self, retry: u32) -> Duration {
        self.initial_backoff
            .mul_f64(self.multiplier.powi(retry.saturating_sub(1) as i32))
    }
}

#[derive(Debug, Deserialize)]
struct WireResponse {
    candidates: Vec<Candidate>,
}

pub struct RemoteGenerator {
    endpoint: String,
    agent: ureq::Agent,
    retry: RetryPolicy,
}

impl RemoteGenerator {
    /// `base_url` may be the service root or the full `/generate` URL.
    pub fn new(base_url: &str) -> Self {
        let base = base_url.trim_end_matches('/');
        let endpoint = if base.ends_with("/generate") {
            base.to_owned()
        } else {
            format!("{base}/generate")
        };
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(300)))
            .build()
            .into();
        Self {
            endpoint,
            agent,
            retry: RetryPolicy::default(),
        }
    }

    /// Reads the service URL from `QAFORGE_GENERATOR_URL`.
    pub fn from_env() -> Option<Self> {
        std::env::var(GENERATOR_URL_ENV)
            .ok()
            .filter(|u| !u.trim().is_empty())
            .map(|u| Self::new(&u))
    }

    pub fn with_retry_policy(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn attempt(
        &self,
        request: &GenerationRequest,
    ) -> Result<Vec<Candidate>, (TransportErrorKind, String)> {
        let mut response = self
            .agent
            .post(&self.endpoint)
            .send_json(request)
            .map_err(|e| (TransportErrorKind::Unreachable, e.to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| (TransportErrorKind::Unreachable, e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err((TransportErrorKind::Status(status), truncate(&body)));
        }
        let parsed: WireResponse = serde_json::from_str(&body).map_err(|e| {
            (
                TransportErrorKind::Protocol,
                format!("bad response body: {e}"),
            )
        })?;
        if parsed.candidates.len() != request.num_samples {
            return Err((
                TransportErrorKind::Protocol,
                format!(
                    "expected {} candidates, got {}",
                    request.num_samples,
                    parsed.candidates.len()
                ),
            ));
        }
        if let Some(bad) = parsed.candidates.iter().find(|c| !c.lm_score.is_finite()) {
            return Err((
                TransportErrorKind::Protocol,
                format!("non-finite lm_score for {:?}", bad.text),
            ));
        }
        Ok(parsed.candidates)
    }
}

fn truncate(body: &str) -> String {
    body.chars().take(200).collect()
}

impl Generator for RemoteGenerator {
    /// The seed is not part of the wire protocol; the service owns its own
    /// randomness.
    fn generate(
        &self,
        request: &GenerationRequest,
        _seed: u64,
    ) -> Result<Vec<Candidate>, GeneratorError> {
        request.validate()?;
        let attempts = self.retry.max_attempts.max(1);
        let mut attempt = 1;
        loop {
            match self.attempt(request) {
                Ok(candidates) => return Ok(candidates),
                Err((kind, message)) => {
                    if !kind.is_retryable() || attempt >= attempts {
                        return Err(TransportError {
                            kind,
                            attempts: attempt,
                            message,
                        }
                        .into());
                    }
                    thread::sleep(self.retry.backoff(attempt));
                    attempt += 1;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_path_is_normalized() {
        assert_eq!(
            RemoteGenerator::new("http://h:1/").endpoint(),
            "http://h:1/generate"
        );
        assert_eq!(
            RemoteGenerator::new("http://h:1/generate").endpoint(),
            "http://h:1/generate"
        );
    }

    #[test]
    fn backoff_grows_exponentially() {
        let p = RetryPolicy {
            max_attempts: 3,
            initial_backoff: Duration::from_millis(100),
            multiplier: 2.0,
        };
        assert_eq!(p.backoff(1), Duration::from_millis(100));
        assert_eq!(p.backoff(2), Duration::from_millis(200));
        assert_eq!(p.backoff(3), Duration::from_millis(400));
    }

    #[test]
    fn missing_score_is_a_protocol_error() {
        let body = r#"{"candidates":[{"text":"question q answer a"}]}"#;
        assert!(serde_json::from_str::<WireResponse>(body).is_err());
    }
}
