//! Writes filtered examples as a SQuAD 1.1 document and reads it back with
//! span validation.
//!
//! ```text
//! cargo run --example emit_squad
//! ```

use qaforge::corpus::Passage;
use qaforge::dataset::{emit_squad, read_squad};
use qaforge::parsefilter::{check_extractive, SyntheticExample};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let passages = vec![
        Passage::new(
            "tees",
            "The Tees rises on Cross Fell and reaches the sea near Middlesbrough.",
            "en",
        )?,
        Passage::new(
            "wye",
            "El Wye nace en Plynlimon y desemboca en el Severn.",
            "es",
        )?,
    ];
    let pairs = [
        ("tees", "where does the Tees rise", "Cross Fell"),
        (
            "tees",
            "where does the Tees reach the sea",
            "near Middlesbrough",
        ),
        ("wye", "¿dónde nace el Wye?", "Plynlimon"),
    ];
    let examples: Vec<SyntheticExample> = pairs
        .iter()
        .map(|&(id, question, answer)| {
            let passage = passages.iter().find(|p| p.id() == id).unwrap();
            SyntheticExample {
                passage_id: id.into(),
                question: question.into(),
                answer: answer.into(),
                answer_start: check_extractive(answer, passage.text()),
                lm_score: -1.0,
                language: passage.language().into(),
            }
        })
        .collect();

    let dataset = emit_squad(&examples, passages.as_slice())?;
    let bytes = dataset.to_bytes();
    println!("{}", String::from_utf8(bytes.clone())?);

    let read = read_squad(bytes.as_slice())?;
    println!(
        "{} qas, clean: {}",
        read.dataset.qa_count(),
        read.report.is_clean()
    );
    Ok(())
}
