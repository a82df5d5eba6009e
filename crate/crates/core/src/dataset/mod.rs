//! SQuAD-1.1 documents and staged QA training manifests.

mod manifest;
mod squad;

pub use manifest::{
    build_training_mix, ManifestError, MixOverrides, StageHyperparameters, StageOverrides,
    TrainingManifest, TrainingStage, GOLD_STAGE, SYNTHETIC_STAGE,
};
pub use squad::{
    emit_squad, qa_id, read_squad, validate, Answer, Article, EmitError, Paragraph, PassageLookup,
    Qa, ReadError, SquadDataset, SquadRead, ValidationReport, Violation, ViolationKind,
    SQUAD_VERSION,
};
