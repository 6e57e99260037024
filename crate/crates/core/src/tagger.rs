//! Keyword-lexicon tagging of user utterances.
//!
//! Matching is case-insensitive substring search, anchored at token
//! boundaries: a pattern whose first (last) character is alphanumeric only
//! matches where the preceding (following) text character is not.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::tags::{ContextTag, InterventionTag, UnknownTag};

pub const DEFAULT_LEXICON: &str = include_str!("../../../lexicons/default.json");

const INTERROGATIVES: &[&str] = &[
    "what", "how", "why", "when", "where", "which", "who", "can", "could", "would", "will", "do",
    "does", "did", "is", "are",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stimulus {
    pub text: String,
    pub turn_index: u32,
}

impl Stimulus {
    pub fn new(text: impl Into<String>, turn_index: u32) -> Self {
        Stimulus {
            text: text.into(),
            turn_index,
        }
    }

    pub fn is_valid(&self) -> bool {
        !self.text.trim().is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSet {
    pub context_tags: BTreeSet<ContextTag>,
    pub intervention_tags: BTreeSet<InterventionTag>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagKind {
    Context,
    Intervention,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tag {
    Context(ContextTag),
    Intervention(InterventionTag),
}

impl Tag {
    pub fn kind(self) -> TagKind {
        match self {
            Tag::Context(_) => TagKind::Context,
            Tag::Intervention(_) => TagKind::Intervention,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Tag::Context(t) => t.as_str(),
            Tag::Intervention(t) => t.as_str(),
        }
    }
}

/// One lexicon entry. The file form is `{pattern, emits, kind}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawRule", into = "RawRule")]
pub struct Rule {
    pattern: String,
    emits: Tag,
}

#[derive(Serialize, Deserialize)]
struct RawRule {
    pattern: String,
    emits: String,
    kind: TagKind,
}

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("lexicon rule has an empty pattern")]
    EmptyPattern,
    #[error(transparent)]
    UnknownTag(#[from] UnknownTag),
    #[error("lexicon parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

impl TryFrom<RawRule> for Rule {
    type Error = LexiconError;

    fn try_from(raw: RawRule) -> Result<Self, Self::Error> {
        let emits = match raw.kind {
            TagKind::Context => Tag::Context(raw.emits.parse()?),
            TagKind::Intervention => Tag::Intervention(raw.emits.parse()?),
        };
        Rule::new(raw.pattern, emits)
    }
}

impl From<Rule> for RawRule {
    fn from(rule: Rule) -> Self {
        RawRule {
            pattern: rule.pattern,
            emits: rule.emits.token().to_string(),
            kind: rule.emits.kind(),
        }
    }
}

impl Rule {
    pub fn new(pattern: impl Into<String>, emits: Tag) -> Result<Self, LexiconError> {
        let pattern = pattern.into().to_lowercase();
        if pattern.trim().is_empty() {
            return Err(LexiconError::EmptyPattern);
        }
        Ok(Rule { pattern, emits })
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    pub fn emits(&self) -> Tag {
        self.emits
    }

    fn matches(&self, lowered: &str) -> bool {
        contains_at_boundary(lowered, &self.pattern)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Lexicon {
    rules: Vec<Rule>,
}

impl Lexicon {
    pub fn new(rules: Vec<Rule>) -> Self {
        Lexicon { rules }
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn push(&mut self, rule: Rule) {
        self.rules.push(rule);
    }

    pub fn from_json(text: &str) -> Result<Self, LexiconError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("lexicon serializes");
        text.push('\n');
        text
    }
}

/// The shipped lexicon (`lexicons/default.json`).
pub fn default_lexicon() -> Lexicon {
    Lexicon::from_json(DEFAULT_LEXICON).expect("shipped lexicon is valid")
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn contains_at_boundary(haystack: &str, needle: &str) -> bool {
    let starts_word = needle.chars().next().is_some_and(is_word_char);
    let ends_word = needle.chars().next_back().is_some_and(is_word_char);
    haystack.match_indices(needle).any(|(at, _)| {
        let before_ok =
            !starts_word || !haystack[..at].chars().next_back().is_some_and(is_word_char);
        let after_ok = !ends_word
            || !haystack[at + needle.len()..]
                .chars()
                .next()
                .is_some_and(is_word_char);
        before_ok && after_ok
    })
}

fn looks_like_question(lowered: &str) -> bool {
    let trimmed = lowered.trim();
    if trimmed.ends_with('?') {
        return true;
    }
    let first = trimmed
        .split(|c: char| !is_word_char(c) && c != '\'')
        .find(|w| !w.is_empty())
        .unwrap_or("");
    INTERROGATIVES.contains(&first)
}

/// Tag one utterance. Deterministic; `novel_task` is added as a fallback
/// when no context rule fires.
pub fn tag_stimulus(stimulus: &Stimulus, lexicon: &Lexicon) -> TagSet {
    let lowered = stimulus.text.to_lowercase();
    let mut tags = TagSet::default();
    for rule in lexicon.rules.iter().filter(|r| r.matches(&lowered)) {
        match rule.emits {
            Tag::Context(t) => {
                tags.context_tags.insert(t);
            }
            Tag::Intervention(t) => {
                tags.intervention_tags.insert(t);
            }
        }
    }
    if looks_like_question(&lowered) {
        tags.intervention_tags.insert(InterventionTag::Question);
    }
    if tags.context_tags.is_empty() {
        tags.context_tags.insert(ContextTag::NovelTask);
    }
    tags
}
