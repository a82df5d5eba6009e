use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::normalize::{normalize_answer, tokenize_for_f1, NormalizationProfile};
use super::MetricsError;
use crate::dataset::SquadDataset;

/// 1 when the normalized prediction equals some normalized gold answer.
pub fn exact_match<S: AsRef<str>>(
    prediction: &str,
    golds: &[S],
    profile: &NormalizationProfile,
) -> Result<bool, MetricsError> {
    if golds.is_empty() {
        return Err(MetricsError::NoGolds);
    }
    let pred = normalize_answer(prediction, profile);
    Ok(golds
        .iter()
        .any(|g| normalize_answer(g.as_ref(), profile) == pred))
}

/// Best token-overlap F1 of `prediction` against any gold answer.
pub fn f1<S: AsRef<str>>(
    prediction: &str,
    golds: &[S],
    profile: &NormalizationProfile,
) -> Result<f64, MetricsError> {
    if golds.is_empty() {
        return Err(MetricsError::NoGolds);
    }
    let pred_norm = normalize_answer(prediction, profile);
    let pred_tokens = tokenize_for_f1(&pred_norm, profile);
    Ok(golds
        .iter()
        .map(|g| {
            let gold_norm = normalize_answer(g.as_ref(), profile);
            token_f1(&pred_tokens, &tokenize_for_f1(&gold_norm, profile))
        })
        .fold(0.0, f64::max))
}

/// Harmonic mean of precision and recall over the multiset intersection.
pub fn token_f1(prediction: &[&str], gold: &[&str]) -> f64 {
    if prediction.is_empty() || gold.is_empty() {
        return if prediction.is_empty() && gold.is_empty() {
            1.0
        } else {
            0.0
        };
    }
    let mut gold_counts: HashMap<&str, usize> = HashMap::new();
    for tok in gold {
        *gold_counts.entry(tok).or_default() += 1;
    }
    let mut overlap = 0usize;
    for tok in prediction {
        if let Some(n) = gold_counts.get_mut(tok) {
            if *n > 0 {
                *n -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / prediction.len() as f64;
    let recall = overlap as f64 / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExampleScore {
    pub em: u8,
    pub f1: f64,
}

/// Aggregate EM/F1 in percent plus per-question scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub exact_match: f64,
    pub f1: f64,
    pub total: usize,
    pub per_example: BTreeMap<String, ExampleScore>,
}

impl EvalReport {
    fn from_scores(per_example: BTreeMap<String, ExampleScore>) -> Self {
        let total = per_example.len();
        let (em_sum, f1_sum) = per_example
            .values()
            .fold((0.0, 0.0), |(e, f), s| (e + f64::from(s.em), f + s.f1));
        let pct = |sum: f64| {
            if total == 0 {
                0.0
            } else {
                100.0 * sum / total as f64
            }
        };
        Self {
            exact_match: pct(em_sum),
            f1: pct(f1_sum),
            total,
            per_example,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalOptions {
    /// Score questions without a prediction as 0 instead of failing.
    pub missing_as_zero: bool,
}

/// Scores predictions (qa id → answer text) against every question of
/// `dataset`, taking the max over each question's gold answers.
pub fn evaluate_dataset(
    predictions: &HashMap<String, String>,
    dataset: &SquadDataset,
    profile: &NormalizationProfile,
    options: EvalOptions,
) -> Result<EvalReport, MetricsError> {
    let missing: Vec<String> = dataset
        .qas()
        .filter(|(_, qa)| !predictions.contains_key(&qa.id))
        .map(|(_, qa)| qa.id.clone())
        .collect();
    if !missing.is_empty() && !options.missing_as_zero {
        return Err(MetricsError::MissingPredictions(missing));
    }

    let mut per_example = BTreeMap::new();
    for (_, qa) in dataset.qas() {
        let golds: Vec<&str> = qa.answers.iter().map(|a| a.text.as_str()).collect();
        if golds.is_empty() {
            return Err(MetricsError::NoGoldsFor(qa.id.clone()));
        }
        let score = match predictions.get(&qa.id) {
            Some(pred) => ExampleScore {
                em: u8::from(exact_match(pred, &golds, profile)?),
                f1: f1(pred, &golds, profile)?,
            },
            None => ExampleScore { em: 0, f1: 0.0 },
        };
        per_example.insert(qa.id.clone(), score);
    }
    Ok(EvalReport::from_scores(per_example))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Answer, Article, Paragraph, Qa};

    fn squad() -> NormalizationProfile {
        NormalizationProfile::squad("en")
    }

    #[test]
    fn exact_match_examples() {
        let p = squad();
        assert!(exact_match("Brunot Island", &["Brunot Island"], &p).unwrap());
        assert!(exact_match("the Brunot Island", &["Brunot Island"], &p).unwrap());
        assert!(!exact_match("Brunot", &["Brunot Island"], &p).unwrap());
        assert!(matches!(
            exact_match::<&str>("x", &[], &p),
            Err(MetricsError::NoGolds)
        ));
    }

    #[test]
    fn f1_examples() {
        let p = squad();
        assert_eq!(
            f1("Dr. Felix Brunot", &["Dr. Felix Brunot"], &p).unwrap(),
            1.0
        );
        assert_eq!(token_f1(&["a", "b"], &["b", "c"]), 0.5);
        assert_eq!(f1("xyz", &["abc"], &p).unwrap(), 0.0);
        assert!(f1::<&str>("x", &[], &p).is_err());
    }

    #[test]
    fn empty_normalizations() {
        let p = squad();
        // both normalize to nothing
        assert_eq!(f1("the", &["a"], &p).unwrap(), 1.0);
        assert_eq!(f1("the", &["island"], &p).unwrap(), 0.0);
        assert_eq!(f1("island", &["."], &p).unwrap(), 0.0);
    }

    #[test]
    fn multiset_overlap_counts_repeats_once_each() {
        // overlap of [a,a,b] and [a,c]: one "a"
        let f = token_f1(&["a", "a", "b"], &["a", "c"]);
        let (p, r) = (1.0 / 3.0, 1.0 / 2.0);
        assert!((f - 2.0 * p * r / (p + r)).abs() < 1e-15);
    }

    fn dataset(qas: Vec<(&str, Vec<&str>)>) -> SquadDataset {
        SquadDataset {
            version: "1.1".into(),
            articles: vec![Article {
                title: "t".into(),
                paragraphs: vec![Paragraph {
                    context: "ctx".into(),
                    qas: qas
                        .into_iter()
                        .map(|(id, golds)| Qa {
                            id: id.into(),
                            question: "?".into(),
                            answers: golds
                                .into_iter()
                                .map(|g| Answer {
                                    text: g.into(),
                                    answer_start: 0,
                                })
                                .collect(),
                        })
                        .collect(),
                }],
            }],
        }
    }

    fn preds(items: &[(&str, &str)]) -> HashMap<String, String> {
        items
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn dataset_aggregates() {
        let ds = dataset(vec![
            ("q1", vec!["Denver Broncos"]),
            ("q2", vec!["Carolina Panthers"]),
        ]);
        let all = evaluate_dataset(
            &preds(&[("q1", "Denver Broncos"), ("q2", "Carolina Panthers")]),
            &ds,
            &squad(),
            EvalOptions::default(),
        )
        .unwrap();
        assert_eq!((all.exact_match, all.f1, all.total), (100.0, 100.0, 2));

        let half = evaluate_dataset(
            &preds(&[("q1", "Denver Broncos"), ("q2", "Santa Clara")]),
            &ds,
            &squad(),
            EvalOptions::default(),
        )
        .unwrap();
        assert_eq!((half.exact_match, half.f1), (50.0, 50.0));
        assert_eq!(half.per_example["q2"], ExampleScore { em: 0, f1: 0.0 });
    }

    #[test]
    fn missing_predictions() {
        let ds = dataset(vec![("q1", vec!["x"]), ("q2", vec!["y"])]);
        let err =
            evaluate_dataset(&HashMap::new(), &ds, &squad(), EvalOptions::default()).unwrap_err();
        assert!(matches!(err, MetricsError::MissingPredictions(ref ids) if ids == &["q1", "q2"]));

        let lenient = EvalOptions {
            missing_as_zero: true,
        };
        let report = evaluate_dataset(&preds(&[("q1", "x")]), &ds, &squad(), lenient).unwrap();
        assert_eq!((report.exact_match, report.total), (50.0, 2));
    }

    #[test]
    fn max_over_golds() {
        let ds = dataset(vec![(
            "q",
            vec!["Santa Clara, California", "Levi's Stadium"],
        )]);
        let r = evaluate_dataset(
            &preds(&[("q", "Levi's Stadium")]),
            &ds,
            &squad(),
            EvalOptions::default(),
        )
        .unwrap();
        assert_eq!(r.exact_match, 100.0);
    }
}
