//! Reads the toy corpus, keeps passages inside the default length bounds and
//! draws a seeded sample.
//!
//! ```text
//! cargo run --example ingest_and_sample [n] [seed]
//! ```

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use qaforge::corpus::{filter_by_length, parse_passage_stream, sample_passages, LengthBounds};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map(|a| a.parse()).transpose()?.unwrap_or(5);
    let seed: u64 = args.next().map(|a| a.parse()).transpose()?.unwrap_or(7);

    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/toy/passages.jsonl");
    let mut passages = Vec::new();
    for record in parse_passage_stream(BufReader::new(File::open(path)?)) {
        match record {
            Ok(p) => passages.push(p),
            Err(e) => eprintln!("skipped: {e}"),
        }
    }
    let kept: Vec<_> =
        filter_by_length(passages.iter().cloned(), LengthBounds::new(30, 450)?).collect();
    println!(
        "{} passages read, {} within 30..=450 tokens",
        passages.len(),
        kept.len()
    );

    for p in sample_passages(&kept, n, seed) {
        println!(
            "{:>8}  {:>3} tokens  {}",
            p.id(),
            p.token_count(),
            &p.text()[..40]
        );
    }
    Ok(())
}
