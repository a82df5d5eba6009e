//! Full pipeline on the bundled toy corpus with the in-process reference
//! backend: ingest, length filter, generate 20 candidates per passage, keep
//! the top 10 extractive pairs, write SQuAD JSON, print the stage table.
//!
//! ```text
//! cargo run --example end_to_end [output_dir]
//! ```

use std::path::PathBuf;

use qaforge::pipeline::{run_pipeline, stats_summary, BackendConfig, PipelineConfig, DATASET_FILE};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/toy");
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("qaforge-end-to-end"));

    let mut config = PipelineConfig::new(
        fixtures.join("passages.jsonl"),
        &out,
        "en",
        BackendConfig::Reference {
            training_data: fixtures.join("train.json"),
            order: 3,
            // the toy corpus is tiny; a small constant keeps samples on
            // observed continuations
            smoothing: 0.01,
        },
    );
    config.seed = 42;

    let report = run_pipeline(&config)?;
    print!("{}", stats_summary(&report));
    println!("dataset written to {}", out.join(DATASET_FILE).display());
    Ok(())
}
