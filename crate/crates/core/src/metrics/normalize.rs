use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use unicode_general_category::{get_general_category, GeneralCategory};

use super::MetricsError;
use crate::text;

const BUILTIN_PROFILES: &str = include_str!("../../profiles/mlqa.json");

const SQUAD_ARTICLES: [&str; 3] = ["a", "an", "the"];

/// Which official evaluator's answer normalization to follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// Language-independent SQuAD-1.1 rules (English articles, ASCII
    /// punctuation, whitespace tokens).
    Squad,
    /// Per-language rules from a profile table.
    Mlqa,
}

impl FromStr for EvalMode {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "squad" => Ok(Self::Squad),
            "mlqa" => Ok(Self::Mlqa),
            other => Err(MetricsError::UnknownMode(other.to_owned())),
        }
    }
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Squad => "squad",
            Self::Mlqa => "mlqa",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PunctuationClass {
    /// The 32 ASCII punctuation characters.
    Ascii,
    /// ASCII punctuation plus every character in a Unicode `P*` category.
    Unicode,
}

impl PunctuationClass {
    pub fn contains(self, c: char) -> bool {
        c.is_ascii_punctuation() || (self == Self::Unicode && is_unicode_punctuation(c))
    }
}

fn is_unicode_punctuation(c: char) -> bool {
    use GeneralCategory::*;
    matches!(
        get_general_category(c),
        ConnectorPunctuation
            | DashPunctuation
            | OpenPunctuation
            | ClosePunctuation
            | InitialPunctuation
            | FinalPunctuation
            | OtherPunctuation
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Segmentation {
    Whitespace,
    /// Han characters are single tokens; other runs split on whitespace.
    PerCharacterMixed,
}

/// One entry of a profile configuration file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageProfile {
    pub language: String,
    pub articles: Vec<String>,
    pub punctuation_class: PunctuationClass,
    pub segmentation: Segmentation,
}

/// Versioned per-language normalization rules for MLQA-style evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileTable {
    pub version: String,
    pub languages: Vec<LanguageProfile>,
}

impl ProfileTable {
    /// The table shipped with this crate (`profiles/mlqa.json`).
    pub fn builtin() -> Self {
        Self::from_json(BUILTIN_PROFILES).expect("built-in profile table is valid")
    }

    pub fn from_json(json: &str) -> Result<Self, MetricsError> {
        serde_json::from_str(json).map_err(|e| MetricsError::ProfileConfig(e.to_string()))
    }

    pub fn get(&self, language: &str) -> Option<&LanguageProfile> {
        self.languages.iter().find(|p| p.language == language)
    }

    pub fn profile(
        &self,
        mode: EvalMode,
        language: &str,
    ) -> Result<NormalizationProfile, MetricsError> {
        match mode {
            EvalMode::Squad => Ok(NormalizationProfile::squad(language)),
            EvalMode::Mlqa => {
                let entry = self
                    .get(language)
                    .ok_or_else(|| MetricsError::UnknownLanguage(language.to_owned()))?;
                Ok(NormalizationProfile {
                    mode,
                    language: language.to_owned(),
                    articles: entry.articles.iter().cloned().collect(),
                    punctuation: entry.punctuation_class,
                    segmentation: entry.segmentation,
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizationProfile {
    pub mode: EvalMode,
    pub language: String,
    pub articles: HashSet<String>,
    pub punctuation: PunctuationClass,
    pub segmentation: Segmentation,
}

impl NormalizationProfile {
    /// SQuAD rules; `language` is recorded but does not change behavior.
    pub fn squad(language: &str) -> Self {
        Self {
            mode: EvalMode::Squad,
            language: language.to_owned(),
            articles: SQUAD_ARTICLES.iter().map(|a| a.to_string()).collect(),
            punctuation: PunctuationClass::Ascii,
            segmentation: Segmentation::Whitespace,
        }
    }

    /// MLQA rules for `language` from the built-in table.
    pub fn mlqa(language: &str) -> Result<Self, MetricsError> {
        ProfileTable::builtin().profile(EvalMode::Mlqa, language)
    }
}

/// Lowercase, strip punctuation, drop standalone articles, and rejoin the
/// remaining tokens with single spaces.
pub fn normalize_answer(text: &str, profile: &NormalizationProfile) -> String {
    let stripped: String = text
        .to_lowercase()
        .chars()
        .filter(|&c| !profile.punctuation.contains(c))
        .collect();
    let kept = stripped
        .split_whitespace()
        .filter(|tok| !profile.articles.contains(*tok));
    match profile.segmentation {
        Segmentation::Whitespace => kept.collect::<Vec<_>>().join(" "),
        Segmentation::PerCharacterMixed => kept
            .flat_map(text::split_mixed)
            .collect::<Vec<_>>()
            .join(" "),
    }
}

/// Token sequence used for F1 overlap.
pub fn tokenize_for_f1<'a>(normalized: &'a str, profile: &NormalizationProfile) -> Vec<&'a str> {
    segment(normalized, profile.segmentation)
}

pub(crate) fn segment(text: &str, segmentation: Segmentation) -> Vec<&str> {
    match segmentation {
        Segmentation::Whitespace => text.split_whitespace().collect(),
        Segmentation::PerCharacterMixed => text::split_mixed(text).collect(),
    }
}
