mod common;

use std::collections::HashMap;
use std::fs;

use qaforge::dataset::{read_squad, ReadError, ViolationKind};
use qaforge::metrics::{evaluate_dataset, EvalOptions, NormalizationProfile};

use common::fixture;

fn excerpt() -> String {
    fs::read_to_string(fixture("squad/dev-excerpt.json")).unwrap()
}

#[test]
fn dev_excerpt_reads_clean() {
    let read = read_squad(excerpt().as_bytes()).unwrap();
    assert!(read.report.is_clean(), "{:?}", read.report);
    assert_eq!(read.dataset.version, "1.1");
    assert_eq!(read.dataset.qa_count(), 5);
    let (paragraph, qa) = read.dataset.qas().next().unwrap();
    let start = qa.answers[0].answer_start;
    let span: String = paragraph.context.chars().skip(start).take(14).collect();
    assert_eq!(span, "Denver Broncos");
}

#[test]
fn scoring_against_the_excerpt() {
    let dataset = read_squad(excerpt().as_bytes()).unwrap().dataset;
    let profile = NormalizationProfile::squad("en");
    let golds: HashMap<String, String> = dataset
        .qas()
        .map(|(_, qa)| (qa.id.clone(), qa.answers[0].text.clone()))
        .collect();
    let report = evaluate_dataset(&golds, &dataset, &profile, EvalOptions::default()).unwrap();
    assert_eq!(
        (report.exact_match, report.f1, report.total),
        (100.0, 100.0, 5)
    );

    let mut preds = golds.clone();
    preds.insert(
        "56be4db0acb8001400a502ec".into(),
        "the Denver Broncos!".into(),
    );
    // santa clara vs "Santa Clara, California": P = 1, R = 2/3, F1 = 0.8
    preds.insert("56be4db0acb8001400a502ee".into(), "Santa Clara".into());
    preds.insert("56be4db0acb8001400a502f0".into(), "silver".into());
    let report = evaluate_dataset(&preds, &dataset, &profile, EvalOptions::default()).unwrap();
    assert_eq!(report.total, 5);
    assert!((report.exact_match - 60.0).abs() < 1e-9);
    assert!((report.f1 - 100.0 * 3.8 / 5.0).abs() < 1e-9);
    assert_eq!(report.per_example["56be4db0acb8001400a502ec"].em, 1);
    assert!((report.per_example["56be4db0acb8001400a502ee"].f1 - 0.8).abs() < 1e-12);
}

#[test]
fn structural_errors_name_the_json_path() {
    let broken = excerpt().replacen("\"answer_start\": 249", "\"answer_start\": \"249\"", 1);
    assert_ne!(broken, excerpt(), "fixture layout changed");
    match read_squad(broken.as_bytes()) {
        Err(ReadError::Parse { path, .. }) => {
            assert_eq!(path, "data[0].paragraphs[0].qas[1].answers[0].answer_start")
        }
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn shifted_offsets_are_reported() {
    let shifted = excerpt().replacen("\"answer_start\": 403", "\"answer_start\": 404", 1);
    assert_ne!(shifted, excerpt(), "fixture layout changed");
    let read = read_squad(shifted.as_bytes()).unwrap();
    assert_eq!(read.report.violations.len(), 1);
    let violation = &read.report.violations[0];
    assert_eq!(violation.qa_id, "56be4db0acb8001400a502ee");
    assert!(matches!(
        &violation.kind,
        ViolationKind::SpanMismatch { answer_index: 0, found } if found == "anta Clara, California."
    ));
}
