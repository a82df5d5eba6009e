//! Runs the parse, extractiveness, dedup and top-m steps over a fixed set of
//! candidates and prints what survives.
//!
//! ```text
//! cargo run --example filter_candidates
//! ```

use qaforge::corpus::Passage;
use qaforge::generator::Candidate;
use qaforge::parsefilter::{run_filter_pipeline, FilterConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let passage = Passage::new(
        "avon",
        "The Avon River rises in the hills and flows west to the sea at Bristol.",
        "en",
    )?;
    let raw = [
        (
            "question where does the Avon rise answer in the hills",
            -4.1,
        ),
        (
            "question where does the Avon rise answer in the hills",
            -3.2,
        ),
        ("question which city lies at the mouth answer Bristol", -5.0),
        ("question how long is it answer 75 miles", -2.0),
        ("where does it flow answer west", -1.0),
        ("question which way does it flow answer", -1.5),
        ("question which way does it flow answer west", -6.3),
    ];
    let candidates: Vec<Candidate> = raw
        .iter()
        .map(|&(text, lm_score)| Candidate {
            text: text.into(),
            lm_score,
        })
        .collect();

    let config = FilterConfig {
        samples_per_passage: candidates.len(),
        keep_per_passage: 2,
        ..FilterConfig::default()
    };
    let (kept, stats) = run_filter_pipeline(&passage, &candidates, &config);
    println!("{stats:#?}");
    for ex in kept {
        println!(
            "{:>6.2}  {} -> {} @ {:?}",
            ex.lm_score, ex.question, ex.answer, ex.answer_start
        );
    }
    Ok(())
}
