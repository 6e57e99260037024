//! Closed tag vocabularies shared by the tagger, persona files and the engine.
//!
//! Variants are declared in lexicographic order so that the derived `Ord`
//! matches the sorted-key order of canonical files.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// What situation the persona is facing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextTag {
    Algebra,
    Arithmetic,
    Geometry,
    NovelTask,
    SocialExposure,
    TimePressure,
}

/// What the user is doing to the persona.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterventionTag {
    Encouragement,
    MindsetReframe,
    Pressure,
    Question,
    Scaffold,
    Validation,
}

impl ContextTag {
    pub const ALL: [ContextTag; 6] = [
        ContextTag::Algebra,
        ContextTag::Arithmetic,
        ContextTag::Geometry,
        ContextTag::NovelTask,
        ContextTag::SocialExposure,
        ContextTag::TimePressure,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ContextTag::Algebra => "algebra",
            ContextTag::Arithmetic => "arithmetic",
            ContextTag::Geometry => "geometry",
            ContextTag::NovelTask => "novel_task",
            ContextTag::SocialExposure => "social_exposure",
            ContextTag::TimePressure => "time_pressure",
        }
    }

    /// Subject-matter tags, used to fill the `{domain}` template placeholder.
    pub fn is_subject(self) -> bool {
        matches!(
            self,
            ContextTag::Algebra | ContextTag::Arithmetic | ContextTag::Geometry
        )
    }
}

impl InterventionTag {
    pub const ALL: [InterventionTag; 6] = [
        InterventionTag::Encouragement,
        InterventionTag::MindsetReframe,
        InterventionTag::Pressure,
        InterventionTag::Question,
        InterventionTag::Scaffold,
        InterventionTag::Validation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            InterventionTag::Encouragement => "encouragement",
            InterventionTag::MindsetReframe => "mindset_reframe",
            InterventionTag::Pressure => "pressure",
            InterventionTag::Question => "question",
            InterventionTag::Scaffold => "scaffold",
            InterventionTag::Validation => "validation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {kind} tag `{token}`")]
pub struct UnknownTag {
    pub kind: &'static str,
    pub token: String,
}

impl FromStr for ContextTag {
    type Err = UnknownTag;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ContextTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| UnknownTag {
                kind: "context",
                token: s.to_string(),
            })
    }
}

impl FromStr for InterventionTag {
    type Err = UnknownTag;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        InterventionTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| UnknownTag {
                kind: "intervention",
                token: s.to_string(),
            })
    }
}

impl fmt::Display for ContextTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for InterventionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
