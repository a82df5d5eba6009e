//! Synthetic multilingual question answering data.
//!
//! A passage corpus goes in, candidate question/answer strings come out of a
//! sequence generator, and the filter keeps the extractive, highest-scoring
//! pairs, written as SQuAD-1.1 JSON. The same crate evaluates QA predictions
//! (EM/F1) and question generation (corpus BLEU).
//!
//! | module | role |
//! |---|---|
//! | [`corpus`] | JSONL passage ingestion, token-length filter, seeded sampling |
//! | [`generator`] | generation request/response types, reference n-gram backend, HTTP client |
//! | [`parsefilter`] | candidate parsing, extractiveness, dedup and top-m scoring |
//! | [`dataset`] | SQuAD-1.1 emission/validation and staged training manifests |
//! | [`metrics`] | EM, F1, BLEU with SQuAD or per-language normalization |
//! | [`pipeline`] | the parallel, resumable end-to-end run and its stage statistics |
//!
//! The `examples/` directory has one runnable program per capability, e.g.
//! `cargo run --example end_to_end`.

pub mod corpus;
pub mod dataset;
pub mod generator;
pub mod metrics;
pub mod parsefilter;
pub mod pipeline;
mod text;

pub use text::{is_han, uses_han_segmentation};
