//! Trains the n-gram reference backend on a handful of examples, samples
//! candidates for a passage and checks the chain rule on one of them.
//!
//! ```text
//! cargo run --example reference_generator
//! ```

use qaforge::generator::{
    train_reference, GenerationRequest, Generator, ReferenceConfig, TrainingExample,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let passage = "The Avon River rises in the hills and flows west to the sea at Bristol";
    let training = vec![
        TrainingExample::new(passage, "where does the Avon River rise", "in the hills"),
        TrainingExample::new(passage, "where does the river meet the sea", "at Bristol"),
        TrainingExample::new(passage, "which way does the Avon River flow", "west"),
    ];
    let backend = train_reference(
        &training,
        ReferenceConfig {
            order: 3,
            smoothing: 0.001,
        },
    )?;
    println!("vocabulary: {} tokens", backend.vocabulary().len());

    let request = GenerationRequest {
        num_samples: 5,
        ..GenerationRequest::new(passage, "en")
    };
    let candidates = backend.generate(&request, 2024)?;
    for c in &candidates {
        println!("{:>9.3}  {}", c.lm_score, c.text);
    }

    // the reported score is the sum of the per-token conditionals
    let first = &candidates[0];
    let rescored = backend.score_sequence(passage, &first.text);
    println!("rescored first candidate: {rescored:.3}");
    Ok(())
}
