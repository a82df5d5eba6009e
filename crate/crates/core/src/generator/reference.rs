//! Word-level n-gram generator with add-one (Laplace) smoothing.
//!
//! The model predicts decoder tokens conditioned on the previous `order - 1`
//! symbols of the stream `[<s>.., passage tokens.., <2xx>?, output tokens..]`.
//! For a context `h` and next symbol `w` (a vocabulary word or end of
//! sequence):
//!
//! ```text
//! p(w | h) = (c(h, w) + alpha) / (c(h) + alpha * (|V| + 1))
//! ```
//!
//! where `|V|` counts every training token plus `<unk>`, and the `+ 1` is the
//! end-of-sequence symbol. Every context therefore defines a proper
//! distribution, including contexts never seen in training.
//!
//! Scores exclude the end-of-sequence event, so a candidate's score equals
//! the sum of the log-probabilities of the tokens in its text whether
//! decoding stopped at end of sequence or at the length limit.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{format_target, Candidate, GenerationRequest, Generator, GeneratorError};

pub const UNKNOWN_TOKEN: &str = "<unk>";
pub const END_OF_SEQUENCE: &str = "</s>";

type Symbol = u32;
const UNK: Symbol = 0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceConfig {
    pub order: usize,
    pub smoothing: f64,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            order: 3,
            smoothing: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub passage: String,
    pub question: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_language: Option<String>,
}

impl TrainingExample {
    pub fn new(
        passage: impl Into<String>,
        question: impl Into<String>,
        answer: impl Into<String>,
    ) -> Self {
        Self {
            passage: passage.into(),
            question: question.into(),
            answer: answer.into(),
            target_language: None,
        }
    }
}

/// Counts observed after one context, kept in decoding rank order
/// (count descending, symbol ascending).
#[derive(Debug, Clone, Default)]
struct ContextCounts {
    total: u64,
    ranked: Vec<(Symbol, u64)>,
    by_symbol: HashMap<Symbol, u64>,
}

#[derive(Debug, Clone)]
pub struct ReferenceBackend {
    config: ReferenceConfig,
    /// `vocab[0]` is `<unk>`; the rest is sorted.
    vocab: Vec<String>,
    index: HashMap<String, Symbol>,
    /// Language tags seen in training, mapped to context-only symbols.
    tags: HashMap<String, Symbol>,
    counts: HashMap<Vec<Symbol>, ContextCounts>,
}

/// Trains an n-gram backend on `(passage, question, answer)` triples.
pub fn train_reference(
    corpus: &[TrainingExample],
    config: ReferenceConfig,
) -> Result<ReferenceBackend, GeneratorError> {
    if corpus.is_empty() {
        return Err(GeneratorError::Config("training corpus is empty".into()));
    }
    if config.order == 0 {
        return Err(GeneratorError::Config("n-gram order must be >= 1".into()));
    }
    if !(config.smoothing.is_finite() && config.smoothing > 0.0) {
        return Err(GeneratorError::Config(
            "smoothing constant must be > 0".into(),
        ));
    }

    let targets = corpus
        .iter()
        .map(|ex| format_target(&ex.question, &ex.answer))
        .collect::<Result<Vec<_>, _>>()?;

    let mut words = BTreeSet::new();
    for (ex, target) in corpus.iter().zip(&targets) {
        words.extend(ex.passage.split_whitespace());
        words.extend(target.split_whitespace());
    }
    words.remove(UNKNOWN_TOKEN);
    words.remove(END_OF_SEQUENCE);

    let mut vocab = vec![UNKNOWN_TOKEN.to_owned()];
    vocab.extend(words.into_iter().map(str::to_owned));
    let index = vocab
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i as Symbol))
        .collect();

    let tag_names: BTreeSet<&str> = corpus
        .iter()
        .filter_map(|ex| ex.target_language.as_deref())
        .collect();

    let mut backend = ReferenceBackend {
        config,
        vocab,
        index,
        tags: HashMap::new(),
        counts: HashMap::new(),
    };
    let first_tag = backend.eos() + 2;
    backend.tags = tag_names
        .into_iter()
        .enumerate()
        .map(|(i, t)| (t.to_owned(), first_tag + i as Symbol))
        .collect();

    let mut raw: HashMap<Vec<Symbol>, HashMap<Symbol, u64>> = HashMap::new();
    for (ex, target) in corpus.iter().zip(&targets) {
        let mut stream = backend.history(&ex.passage, ex.target_language.as_deref());
        let outputs: Vec<Symbol> = target.split_whitespace().map(|t| backend.word(t)).collect();
        for &next in outputs.iter().chain(std::iter::once(&backend.eos())) {
            let ctx = backend.context(&stream);
            *raw.entry(ctx).or_default().entry(next).or_default() += 1;
            stream.push(next);
        }
    }

    backend.counts = raw
        .into_iter()
        .map(|(ctx, next)| {
            let total = next.values().sum();
            let mut ranked: Vec<_> = next.iter().map(|(&s, &c)| (s, c)).collect();
            ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            (
                ctx,
                ContextCounts {
                    total,
                    ranked,
                    by_symbol: next,
                },
            )
        })
        .collect();
    Ok(backend)
}

impl ReferenceBackend {
    pub fn config(&self) -> ReferenceConfig {
        self.config
    }

    /// Vocabulary including `<unk>`, excluding end of sequence.
    pub fn vocabulary(&self) -> &[String] {
        &self.vocab
    }

    fn eos(&self) -> Symbol {
        self.vocab.len() as Symbol
    }

    fn bos(&self) -> Symbol {
        self.eos() + 1
    }

    fn unknown_tag(&self) -> Symbol {
        self.eos() + 2 + self.tags.len() as Symbol
    }

    /// Number of outcomes every conditional distribution ranges over.
    fn outcomes(&self) -> u64 {
        self.vocab.len() as u64 + 1
    }

    fn word(&self, token: &str) -> Symbol {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    fn history(&self, passage: &str, target_language: Option<&str>) -> Vec<Symbol> {
        let pad = self.config.order - 1;
        let mut stream = vec![self.bos(); pad];
        stream.extend(passage.split_whitespace().map(|t| self.word(t)));
        if let Some(lang) = target_language {
            stream.push(self.tags.get(lang).copied().unwrap_or(self.unknown_tag()));
        }
        stream
    }

    fn context(&self, stream: &[Symbol]) -> Vec<Symbol> {
        stream[stream.len() - (self.config.order - 1)..].to_vec()
    }

    fn denominator(&self, counts: Option<&ContextCounts>) -> f64 {
        counts.map_or(0, |c| c.total) as f64 + self.config.smoothing * self.outcomes() as f64
    }

    fn log_prob(&self, ctx: &[Symbol], next: Symbol) -> f64 {
        let counts = self.counts.get(ctx);
        let c = counts
            .and_then(|c| c.by_symbol.get(&next))
            .copied()
            .unwrap_or(0);
        ((c as f64 + self.config.smoothing) / self.denominator(counts)).ln()
    }

    fn score_tokens<'a>(
        &self,
        mut stream: Vec<Symbol>,
        tokens: impl Iterator<Item = &'a str>,
    ) -> (f64, Vec<Symbol>) {
        let mut total = 0.0;
        for tok in tokens {
            let sym = self.word(tok);
            total += self.log_prob(&self.context(&stream), sym);
            stream.push(sym);
        }
        (total, stream)
    }

    /// Total log-probability of `target` given `passage`. Tokens are the
    /// whitespace-separated pieces of `target`; out-of-vocabulary tokens are
    /// scored as `<unk>`.
    pub fn score_sequence(&self, passage: &str, target: &str) -> f64 {
        self.score_sequence_for(passage, None, target)
    }

    /// As [`score_sequence`](Self::score_sequence), conditioned on a
    /// target-language code.
    pub fn score_sequence_for(
        &self,
        passage: &str,
        target_language: Option<&str>,
        target: &str,
    ) -> f64 {
        let history = self.history(passage, target_language);
        self.score_tokens(history, target.split_whitespace()).0
    }

    /// Log-probability of `continuation` given the passage and an already
    /// decoded `prefix`.
    pub fn score_continuation(&self, passage: &str, prefix: &str, continuation: &str) -> f64 {
        let history = self.history(passage, None);
        let (_, stream) = self.score_tokens(history, prefix.split_whitespace());
        self.score_tokens(stream, continuation.split_whitespace()).0
    }

    /// Full next-token distribution after `passage` and `prefix`, in
    /// vocabulary order with end of sequence last.
    pub fn next_token_distribution(
        &self,
        passage: &str,
        target_language: Option<&str>,
        prefix: &str,
    ) -> Vec<(String, f64)> {
        let history = self.history(passage, target_language);
        let (_, stream) = self.score_tokens(history, prefix.split_whitespace());
        let ctx = self.context(&stream);
        self.vocab
            .iter()
            .map(String::as_str)
            .chain(std::iter::once(END_OF_SEQUENCE))
            .enumerate()
            .map(|(i, w)| (w.to_owned(), self.log_prob(&ctx, i as Symbol).exp()))
            .collect()
    }

    /// The `k` most probable next symbols with their smoothed weights
    /// `c(h, w) + alpha`. Seen symbols come first by count; unseen ones all
    /// share the same weight and follow in symbol order.
    fn top_k(&self, ctx: &[Symbol], k: usize) -> Vec<(Symbol, f64)> {
        let alpha = self.config.smoothing;
        let counts = self.counts.get(ctx);
        let mut picked: Vec<(Symbol, f64)> = counts
            .map(|c| {
                c.ranked
                    .iter()
                    .take(k)
                    .map(|&(s, n)| (s, n as f64 + alpha))
                    .collect()
            })
            .unwrap_or_default();
        if picked.len() < k {
            let missing = k - picked.len();
            let unseen = (0..=self.eos())
                .filter(|s| counts.is_none_or(|c| !c.by_symbol.contains_key(s)))
                .take(missing)
                .map(|s| (s, alpha));
            picked.extend(unseen);
        }
        picked
    }

    fn sample_one(&self, request: &GenerationRequest, rng: &mut ChaCha8Rng) -> Candidate {
        let mut stream = self.history(&request.passage, request.target_language.as_deref());
        let mut tokens: Vec<&str> = Vec::new();
        let mut score = 0.0;
        for _ in 0..request.max_output_tokens {
            let ctx = self.context(&stream);
            let choices = self.top_k(&ctx, request.top_k);
            let mass: f64 = choices.iter().map(|c| c.1).sum();
            let mut draw = rng.random::<f64>() * mass;
            let mut next = choices[choices.len() - 1].0;
            for &(sym, weight) in &choices {
                if draw < weight {
                    next = sym;
                    break;
                }
                draw -= weight;
            }
            if next == self.eos() {
                break;
            }
            score += self.log_prob(&ctx, next);
            tokens.push(&self.vocab[next as usize]);
            stream.push(next);
        }
        Candidate {
            text: tokens.join(" "),
            lm_score: score,
        }
    }
}

impl Generator for ReferenceBackend {
    fn generate(
        &self,
        request: &GenerationRequest,
        seed: u64,
    ) -> Result<Vec<Candidate>, GeneratorError> {
        request.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..request.num_samples)
            .map(|_| self.sample_one(request, &mut rng))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Vec<TrainingExample> {
        vec![
            TrainingExample::new(
                "Isla Brunot es una isla en el río Ohio",
                "¿Dónde está la isla?",
                "en el río Ohio",
            ),
            TrainingExample::new(
                "Bulgarische Wissenschaftler kartierten ihn 2009",
                "Wann wurde der Gletscher kartiert?",
                "2009",
            ),
        ]
    }

    #[test]
    fn hand_computed_single_token_scores() {
        let corpus = [TrainingExample::new("p", "q", "a")];
        let config = ReferenceConfig {
            order: 2,
            smoothing: 1.0,
        };
        let backend = train_reference(&corpus, config).unwrap();
        // V = {<unk>, a, answer, p, q, question}, plus end of sequence: 7 outcomes.
        assert_eq!(backend.vocabulary().len(), 6);
        // after "p" the only event seen was "question": (1 + 1) / (1 + 7)
        assert!((backend.score_sequence("p", "question") - (2.0f64 / 8.0).ln()).abs() < 1e-12);
        assert!((backend.score_sequence("p", "q") - (1.0f64 / 8.0).ln()).abs() < 1e-12);
        // unseen context: uniform 1/7
        assert!((backend.score_sequence("zzz", "q") - (1.0f64 / 7.0).ln()).abs() < 1e-12);
        // out-of-vocabulary token scores as <unk>
        assert_eq!(
            backend.score_sequence("p", "nope"),
            backend.score_sequence("p", UNKNOWN_TOKEN)
        );
    }

    #[test]
    fn distributions_sum_to_one() {
        let backend = train_reference(&toy(), ReferenceConfig::default()).unwrap();
        for (passage, prefix) in [
            ("Isla Brunot es una isla en el río Ohio", ""),
            ("Isla Brunot es una isla en el río Ohio", "question ¿Dónde"),
            ("completely unseen", "question"),
            (
                "kartierten ihn 2009",
                "question Wann wurde der Gletscher kartiert? answer",
            ),
        ] {
            let dist = backend.next_token_distribution(passage, None, prefix);
            assert_eq!(dist.len(), backend.vocabulary().len() + 1);
            assert_eq!(dist.last().unwrap().0, END_OF_SEQUENCE);
            let total: f64 = dist.iter().map(|d| d.1).sum();
            assert!((total - 1.0).abs() < 1e-9, "{total}");
        }
    }

    #[test]
    fn greedy_regenerates_single_training_target() {
        let corpus = [TrainingExample::new(
            "Der Gletscher liegt auf Smith Island",
            "Wann wurde er kartiert?",
            "2009",
        )];
        let config = ReferenceConfig {
            order: 2,
            smoothing: 1.0,
        };
        let backend = train_reference(&corpus, config).unwrap();
        let mut req = GenerationRequest::new("Der Gletscher liegt auf Smith Island", "de");
        req.num_samples = 1;
        req.top_k = 1;
        let out = backend.generate(&req, 99).unwrap();
        assert_eq!(out[0].text, "question Wann wurde er kartiert? answer 2009");
    }

    #[test]
    fn generated_scores_match_rescoring() {
        let backend = train_reference(&toy(), ReferenceConfig::default()).unwrap();
        let mut req = GenerationRequest::new("Isla Brunot es una isla en el río Ohio", "es");
        req.num_samples = 20;
        req.top_k = 5;
        req.max_output_tokens = 12;
        let out = backend.generate(&req, 3).unwrap();
        assert_eq!(out.len(), 20);
        for c in &out {
            assert!(c.lm_score <= 0.0);
            let rescored = backend.score_sequence(&req.passage, &c.text);
            assert!((rescored - c.lm_score).abs() < 1e-9, "{c:?} vs {rescored}");
            assert!(c.text.split_whitespace().count() <= 12);
        }
    }

    #[test]
    fn sampling_is_seeded() {
        let backend = train_reference(&toy(), ReferenceConfig::default()).unwrap();
        let req = GenerationRequest::new("Isla Brunot es una isla en el río Ohio", "es");
        assert_eq!(
            backend.generate(&req, 11).unwrap(),
            backend.generate(&req, 11).unwrap()
        );
    }

    #[test]
    fn target_language_changes_conditioning() {
        let mut corpus = toy();
        corpus[1].target_language = Some("de".into());
        let backend = train_reference(&corpus, ReferenceConfig::default()).unwrap();
        let passage = "Bulgarische Wissenschaftler kartierten ihn 2009";
        let plain = backend.score_sequence_for(passage, None, "question Wann");
        let tagged = backend.score_sequence_for(passage, Some("de"), "question Wann");
        assert!(tagged > plain);
        // unseen tag still yields a normalized distribution
        let dist = backend.next_token_distribution(passage, Some("vi"), "");
        let total: f64 = dist.iter().map(|d| d.1).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn config_errors() {
        assert!(train_reference(&[], ReferenceConfig::default()).is_err());
        let bad_order = ReferenceConfig {
            order: 0,
            smoothing: 1.0,
        };
        assert!(train_reference(&toy(), bad_order).is_err());
        let bad_alpha = ReferenceConfig {
            order: 2,
            smoothing: 0.0,
        };
        assert!(train_reference(&toy(), bad_alpha).is_err());
    }

    #[test]
    fn unigram_order_has_empty_context() {
        let config = ReferenceConfig {
            order: 1,
            smoothing: 1.0,
        };
        let backend = train_reference(&toy(), config).unwrap();
        let a = backend.score_sequence("anything", "question");
        let b = backend.score_sequence("else", "question");
        assert_eq!(a, b);
    }
}
