use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SYNTHETIC_STAGE: &str = "synthetic";
pub const GOLD_STAGE: &str = "gold";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageHyperparameters {
    pub epochs: u32,
    pub batch_size: u32,
    pub learning_rate: f64,
}

impl Default for StageHyperparameters {
    /// Two epochs, batch size 64, learning rate 3e-5.
    fn default() -> Self {
        Self {
            epochs: 2,
            batch_size: 64,
            learning_rate: 3e-5,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StageOverrides {
    pub epochs: Option<u32>,
    pub batch_size: Option<u32>,
    pub learning_rate: Option<f64>,
}

impl StageOverrides {
    fn apply(&self, base: StageHyperparameters) -> StageHyperparameters {
        StageHyperparameters {
            epochs: self.epochs.unwrap_or(base.epochs),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            learning_rate: self.learning_rate.unwrap_or(base.learning_rate),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MixOverrides {
    pub synthetic: StageOverrides,
    pub gold: StageOverrides,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingStage {
    pub name: String,
    pub dataset_paths: Vec<PathBuf>,
    pub epochs: u32,
    pub batch_size: u32,
    pub learning_rate: f64,
}

/// Ordered QA finetuning stages: synthetic data first, gold data second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingManifest {
    pub stages: Vec<TrainingStage>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ManifestError {
    #[error("no dataset paths given")]
    NoDatasets,
    #[error("stage {stage:?}: {field} must be positive")]
    NonPositive { stage: String, field: &'static str },
    #[error("gold stage precedes synthetic stage")]
    GoldBeforeSynthetic,
}

impl TrainingManifest {
    pub fn validate(&self) -> Result<(), ManifestError> {
        for stage in &self.stages {
            let bad = if stage.epochs == 0 {
                Some("epochs")
            } else if stage.batch_size == 0 {
                Some("batch_size")
            } else if !(stage.learning_rate.is_finite() && stage.learning_rate > 0.0) {
                Some("learning_rate")
            } else {
                None
            };
            if let Some(field) = bad {
                return Err(ManifestError::NonPositive {
                    stage: stage.name.clone(),
                    field,
                });
            }
        }
        let pos = |name: &str| self.stages.iter().position(|s| s.name == name);
        if let (Some(synthetic), Some(gold)) = (pos(SYNTHETIC_STAGE), pos(GOLD_STAGE)) {
            if gold < synthetic {
                return Err(ManifestError::GoldBeforeSynthetic);
            }
        }
        Ok(())
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialization is infallible")
    }
}

/// Builds the staged finetuning manifest. Stages without datasets are left
/// out.
pub fn build_training_mix(
    synthetic: &[PathBuf],
    gold: &[PathBuf],
    overrides: &MixOverrides,
) -> Result<TrainingManifest, ManifestError> {
    if synthetic.is_empty() && gold.is_empty() {
        return Err(ManifestError::NoDatasets);
    }
    let stages = [
        (SYNTHETIC_STAGE, synthetic, &overrides.synthetic),
        (GOLD_STAGE, gold, &overrides.gold),
    ]
    .into_iter()
    .filter(|(_, paths, _)| !paths.is_empty())
    .map(|(name, paths, ov)| {
        let hp = ov.apply(StageHyperparameters::default());
        TrainingStage {
            name: name.to_owned(),
            dataset_paths: paths.to_vec(),
            epochs: hp.epochs,
            batch_size: hp.batch_size,
            learning_rate: hp.learning_rate,
        }
    })
    .collect();
    let manifest = TrainingManifest { stages };
    manifest.validate()?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paths(names: &[&str]) -> Vec<PathBuf> {
        names.iter().map(PathBuf::from).collect()
    }

    #[test]
    fn synthetic_then_gold_with_defaults() {
        let m = build_training_mix(
            &paths(&["s.json"]),
            &paths(&["squad_en.json", "translate_train_de.json"]),
            &MixOverrides::default(),
        )
        .unwrap();
        let names: Vec<_> = m.stages.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(names, ["synthetic", "gold"]);
        for s in &m.stages {
            assert_eq!((s.epochs, s.batch_size, s.learning_rate), (2, 64, 3e-5));
        }
        assert_eq!(m.stages[1].dataset_paths.len(), 2);
    }

    #[test]
    fn single_stage_manifests() {
        let gold_only =
            build_training_mix(&[], &paths(&["g.json"]), &MixOverrides::default()).unwrap();
        assert_eq!(gold_only.stages.len(), 1);
        assert_eq!(gold_only.stages[0].name, "gold");

        let synth_only =
            build_training_mix(&paths(&["s.json"]), &[], &MixOverrides::default()).unwrap();
        assert_eq!(synth_only.stages.len(), 1);
        assert_eq!(synth_only.stages[0].name, "synthetic");

        assert_eq!(
            build_training_mix(&[], &[], &MixOverrides::default()),
            Err(ManifestError::NoDatasets)
        );
    }

    #[test]
    fn per_stage_overrides() {
        let ov = MixOverrides {
            synthetic: StageOverrides {
                epochs: Some(1),
                ..Default::default()
            },
            gold: StageOverrides {
                learning_rate: Some(5e-5),
                ..Default::default()
            },
        };
        let m = build_training_mix(&paths(&["s"]), &paths(&["g"]), &ov).unwrap();
        assert_eq!(m.stages[0].epochs, 1);
        assert_eq!(m.stages[0].learning_rate, 3e-5);
        assert_eq!(m.stages[1].learning_rate, 5e-5);

        let zero = MixOverrides {
            gold: StageOverrides {
                batch_size: Some(0),
                ..Default::default()
            },
            ..Default::default()
        };
        assert!(matches!(
            build_training_mix(&[], &paths(&["g"]), &zero),
            Err(ManifestError::NonPositive {
                field: "batch_size",
                ..
            })
        ));
    }

    #[test]
    fn manifest_json_shape() {
        let m = build_training_mix(&paths(&["s.json"]), &[], &MixOverrides::default()).unwrap();
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(
            json,
            r#"{"stages":[{"name":"synthetic","dataset_paths":["s.json"],"epochs":2,"batch_size":64,"learning_rate":0.00003}]}"#
        );
        let back: TrainingManifest = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn gold_first_is_rejected() {
        let mut m =
            build_training_mix(&paths(&["s"]), &paths(&["g"]), &MixOverrides::default()).unwrap();
        m.stages.reverse();
        assert_eq!(m.validate(), Err(ManifestError::GoldBeforeSynthetic));
    }
}
