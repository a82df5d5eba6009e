use std::collections::HashMap;

use serde::Serialize;

use super::MetricsError;

/// Corpus BLEU with its components.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BleuScore {
    /// In `[0, 100]`.
    pub score: f64,
    /// Clipped n-gram precision for n = 1..=max_n.
    pub precisions: Vec<f64>,
    pub brevity_penalty: f64,
    pub hypothesis_length: usize,
    pub reference_length: usize,
}

fn ngram_counts<S: AsRef<str>>(tokens: &[S], n: usize) -> HashMap<Vec<&str>, usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            let key: Vec<&str> = window.iter().map(AsRef::as_ref).collect();
            *counts.entry(key).or_default() += 1;
        }
    }
    counts
}

/// Corpus-level BLEU over single references, uniform weights, no smoothing.
pub fn corpus_bleu<H, R>(
    hypotheses: &[Vec<H>],
    references: &[Vec<R>],
    max_n: usize,
) -> Result<BleuScore, MetricsError>
where
    H: AsRef<str>,
    R: AsRef<str>,
{
    if hypotheses.len() != references.len() {
        return Err(MetricsError::LengthMismatch {
            hypotheses: hypotheses.len(),
            references: references.len(),
        });
    }
    if hypotheses.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    if max_n == 0 {
        return Err(MetricsError::InvalidOrder);
    }

    let mut matched = vec![0usize; max_n];
    let mut possible = vec![0usize; max_n];
    let mut hyp_len = 0;
    let mut ref_len = 0;
    for (hyp, reference) in hypotheses.iter().zip(references) {
        hyp_len += hyp.len();
        ref_len += reference.len();
        for n in 1..=max_n {
            let ref_counts = ngram_counts(reference, n);
            for (gram, count) in ngram_counts(hyp, n) {
                matched[n - 1] += count.min(ref_counts.get(&gram).copied().unwrap_or(0));
                possible[n - 1] += count;
            }
        }
    }

    let precisions: Vec<f64> = matched
        .iter()
        .zip(&possible)
        .map(|(&m, &p)| if p == 0 { 0.0 } else { m as f64 / p as f64 })
        .collect();
    let brevity_penalty = if hyp_len > ref_len {
        1.0
    } else if hyp_len == 0 {
        0.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    };
    let score = if precisions.contains(&0.0) {
        0.0
    } else {
        let log_mean = precisions.iter().map(|p| p.ln()).sum::<f64>() / max_n as f64;
        100.0 * brevity_penalty * log_mean.exp()
    };
    Ok(BleuScore {
        score,
        precisions,
        brevity_penalty,
        hypothesis_length: hyp_len,
        reference_length: ref_len,
    })
}

/// Corpus BLEU score in `[0, 100]`.
pub fn bleu<H, R>(
    hypotheses: &[Vec<H>],
    references: &[Vec<R>],
    max_n: usize,
) -> Result<f64, MetricsError>
where
    H: AsRef<str>,
    R: AsRef<str>,
{
    corpus_bleu(hypotheses, references, max_n).map(|b| b.score)
}
