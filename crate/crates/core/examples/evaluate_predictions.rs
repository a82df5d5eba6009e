//! Scores a predictions file against a SQuAD-style dataset in both
//! normalization modes.
//!
//! ```text
//! cargo run --example evaluate_predictions
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::PathBuf;

use qaforge::dataset::{read_squad, SquadDataset};
use qaforge::metrics::{evaluate_dataset, EvalOptions, NormalizationProfile};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/metrics");
    let dataset = read_squad(fs::File::open(dir.join("dataset.json"))?)?.dataset;
    let predictions: HashMap<String, String> =
        serde_json::from_slice(&fs::read(dir.join("predictions.json"))?)?;

    let squad = evaluate_dataset(
        &predictions,
        &dataset,
        &NormalizationProfile::squad("en"),
        EvalOptions::default(),
    )?;
    println!(
        "squad  all  EM {:6.2}  F1 {:6.2}",
        squad.exact_match, squad.f1
    );

    // the fixture titles each article with its language
    let mut by_language: BTreeMap<&str, SquadDataset> = BTreeMap::new();
    for article in &dataset.articles {
        by_language
            .entry(article.title.as_str())
            .or_insert_with(SquadDataset::empty)
            .articles
            .push(article.clone());
    }
    let lenient = EvalOptions {
        missing_as_zero: true,
    };
    for (language, subset) in &by_language {
        let subset_preds: HashMap<String, String> = subset
            .qas()
            .filter_map(|(_, qa)| predictions.get(&qa.id).map(|p| (qa.id.clone(), p.clone())))
            .collect();
        let report = evaluate_dataset(
            &subset_preds,
            subset,
            &NormalizationProfile::mlqa(language)?,
            lenient,
        )?;
        println!(
            "mlqa   {language:<4} EM {:6.2}  F1 {:6.2}",
            report.exact_match, report.f1
        );
    }
    Ok(())
}
