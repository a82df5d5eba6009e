//! Builds the two-stage finetuning manifest: synthetic data first, then gold
//! data, with per-stage overrides.
//!
//! ```text
//! cargo run --example training_mix
//! ```

use std::path::PathBuf;

use qaforge::dataset::{build_training_mix, MixOverrides, StageOverrides};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let overrides = MixOverrides {
        gold: StageOverrides {
            epochs: Some(3),
            ..StageOverrides::default()
        },
        ..MixOverrides::default()
    };
    let manifest = build_training_mix(
        &[
            PathBuf::from("out/de/dataset.json"),
            PathBuf::from("out/es/dataset.json"),
        ],
        &[PathBuf::from("data/squad-train.json")],
        &overrides,
    )?;
    println!("{}", manifest.to_json_pretty());
    Ok(())
}
