//! Behavior synthesis: consensus score → behavior category → utterance.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::construct::ConstructId;
use crate::engine::{ConsensusResult, RoundSnapshot};
use crate::tags::ContextTag;

pub const DEFAULT_TEMPLATES: &str = include_str!("../../../templates/default.json");
pub const EXTERNAL_TEMPLATE_ID: &str = "external";
pub const DEFAULT_BACKEND_TIMEOUT: Duration = Duration::from_secs(2);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorCategory {
    ConfidentAttempt,
    TentativeAttempt,
    Hesitate,
    Deflect,
    GiveUp,
}

impl BehaviorCategory {
    pub const ALL: [BehaviorCategory; 5] = [
        BehaviorCategory::ConfidentAttempt,
        BehaviorCategory::TentativeAttempt,
        BehaviorCategory::Hesitate,
        BehaviorCategory::Deflect,
        BehaviorCategory::GiveUp,
    ];

    /// Step function of the consensus score. Exactly zero is `hesitate`.
    pub fn from_score(b: f64) -> Self {
        if b >= 0.5 {
            BehaviorCategory::ConfidentAttempt
        } else if b >= 0.15 {
            BehaviorCategory::TentativeAttempt
        } else if b > -0.15 {
            BehaviorCategory::Hesitate
        } else if b > -0.5 {
            BehaviorCategory::Deflect
        } else {
            BehaviorCategory::GiveUp
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BehaviorCategory::ConfidentAttempt => "confident_attempt",
            BehaviorCategory::TentativeAttempt => "tentative_attempt",
            BehaviorCategory::Hesitate => "hesitate",
            BehaviorCategory::Deflect => "deflect",
            BehaviorCategory::GiveUp => "give_up",
        }
    }

    pub fn is_avoidance(self) -> bool {
        matches!(self, BehaviorCategory::Deflect | BehaviorCategory::GiveUp)
    }

    pub fn is_attempt(self) -> bool {
        matches!(
            self,
            BehaviorCategory::ConfidentAttempt | BehaviorCategory::TentativeAttempt
        )
    }
}

impl fmt::Display for BehaviorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn categorize(consensus: &ConsensusResult) -> BehaviorCategory {
    BehaviorCategory::from_score(consensus.consensus_score)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorOutcome {
    pub category: BehaviorCategory,
    pub consensus_score: f64,
    pub dominant_agent: ConstructId,
    pub utterance: String,
    pub template_id: String,
}

/// `*` in template files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selector<T> {
    Any,
    Only(T),
}

impl<T: PartialEq> Selector<T> {
    fn accepts(&self, value: &T) -> bool {
        match self {
            Selector::Any => true,
            Selector::Only(v) => v == value,
        }
    }

    fn is_specific(&self) -> bool {
        matches!(self, Selector::Only(_))
    }
}

impl<T: fmt::Display> Serialize for Selector<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Selector::Any => serializer.serialize_str("*"),
            Selector::Only(v) => serializer.collect_str(v),
        }
    }
}

impl<'de, T> Deserialize<'de> for Selector<T>
where
    T: FromStr,
    T::Err: fmt::Display,
{
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        if text == "*" {
            Ok(Selector::Any)
        } else {
            text.parse()
                .map(Selector::Only)
                .map_err(serde::de::Error::custom)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub id: String,
    pub category: BehaviorCategory,
    pub construct: Selector<ConstructId>,
    pub context: Selector<ContextTag>,
    /// May contain `{construct}` and `{domain}`.
    pub text: String,
}

#[derive(Debug, thiserror::Error)]
pub enum TemplateError {
    #[error("template parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("duplicate template id `{0}`")]
    DuplicateId(String),
    #[error("no wildcard template for category `{0}`")]
    MissingFallback(BehaviorCategory),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct TemplateBank {
    templates: Vec<Template>,
}

impl TemplateBank {
    /// Checks id uniqueness and that every category has a fully wildcard template.
    pub fn new(templates: Vec<Template>) -> Result<Self, TemplateError> {
        let mut ids = BTreeSet::new();
        for t in &templates {
            if !ids.insert(t.id.as_str()) {
                return Err(TemplateError::DuplicateId(t.id.clone()));
            }
        }
        for category in BehaviorCategory::ALL {
            let covered = templates.iter().any(|t| {
                t.category == category && t.construct == Selector::Any && t.context == Selector::Any
            });
            if !covered {
                return Err(TemplateError::MissingFallback(category));
            }
        }
        Ok(TemplateBank { templates })
    }

    pub fn from_json(text: &str) -> Result<Self, TemplateError> {
        TemplateBank::new(serde_json::from_str(text)?)
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }
}

pub fn default_templates() -> TemplateBank {
    TemplateBank::from_json(DEFAULT_TEMPLATES).expect("shipped templates are valid")
}

/// Inputs for one rendering.
#[derive(Debug, Clone, Copy)]
pub struct RenderRequest<'a> {
    pub category: BehaviorCategory,
    pub dominant_agent: &'a ConstructId,
    pub display_name: &'a str,
    pub context_tags: &'a BTreeSet<ContextTag>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rendered {
    pub utterance: String,
    pub template_id: String,
}

fn selection_hash(seed: u64, turn_index: u32, category: BehaviorCategory) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(turn_index.to_le_bytes());
    hasher.update(category.as_str().as_bytes());
    let digest = hasher.finalize();
    let mut head = [0u8; 8];
    head.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(head)
}

/// Pick among the most specific matching templates with a stable hash of
/// `(seed, turn_index, category)`, then fill placeholders.
pub fn render_utterance(
    request: &RenderRequest<'_>,
    bank: &TemplateBank,
    seed: u64,
    turn_index: u32,
) -> Rendered {
    let specificity =
        |t: &Template| 2 * u8::from(t.construct.is_specific()) + u8::from(t.context.is_specific());
    let matching: Vec<&Template> = bank
        .templates
        .iter()
        .filter(|t| {
            t.category == request.category
                && t.construct.accepts(request.dominant_agent)
                && match &t.context {
                    Selector::Any => true,
                    Selector::Only(tag) => request.context_tags.contains(tag),
                }
        })
        .collect();
    let best = matching
        .iter()
        .map(|t| specificity(t))
        .max()
        .expect("bank covers every category with a wildcard");
    let candidates: Vec<&Template> = matching
        .into_iter()
        .filter(|t| specificity(t) == best)
        .collect();
    let pick = selection_hash(seed, turn_index, request.category) % candidates.len() as u64;
    let template = candidates[pick as usize];

    let domain = request
        .context_tags
        .iter()
        .find(|t| t.is_subject())
        .map_or("this", |t| t.as_str());
    let utterance = template
        .text
        .replace("{construct}", request.display_name)
        .replace("{domain}", domain);
    Rendered {
        utterance,
        template_id: template.id.clone(),
    }
}

/// Wire format sent to an external text generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendRequest {
    pub persona_id: String,
    pub category: BehaviorCategory,
    pub dominant_agent: ConstructId,
    pub rounds: Vec<RoundSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendResponse {
    pub text: String,
}

pub fn generative_backend_request(
    persona_id: &str,
    consensus: &ConsensusResult,
    category: BehaviorCategory,
) -> BackendRequest {
    BackendRequest {
        persona_id: persona_id.to_string(),
        category,
        dominant_agent: consensus.dominant_agent.clone(),
        rounds: consensus.rounds.clone(),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("backend request failed: {0}")]
    Transport(String),
    #[error("backend returned empty text")]
    Empty,
}

/// Optional surface-text generator. Its output is display-only.
pub trait GenerativeBackend: Send + Sync {
    fn generate(&self, request: &BackendRequest) -> Result<String, BackendError>;
}

/// POSTs a [`BackendRequest`] as JSON and expects `{"text": ...}` back.
pub struct HttpBackend {
    url: String,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpBackend {
            url: url.into(),
            agent,
        }
    }
}

impl GenerativeBackend for HttpBackend {
    fn generate(&self, request: &BackendRequest) -> Result<String, BackendError> {
        let mut response = self
            .agent
            .post(&self.url)
            .send_json(request)
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        let body: BackendResponse = response
            .body_mut()
            .read_json()
            .map_err(|e| BackendError::Transport(e.to_string()))?;
        Ok(body.text)
    }
}

/// Categorize, then take the backend's text if it produces any, otherwise
/// render from the template bank.
pub fn synthesize(
    persona_id: &str,
    consensus: &ConsensusResult,
    request: &RenderRequest<'_>,
    bank: &TemplateBank,
    seed: u64,
    turn_index: u32,
    backend: Option<&dyn GenerativeBackend>,
) -> BehaviorOutcome {
    let category = request.category;
    let external = backend.and_then(|b| {
        let payload = generative_backend_request(persona_id, consensus, category);
        match b.generate(&payload) {
            Ok(text) if !text.trim().is_empty() => Some(text),
            Ok(_) => {
                tracing::warn!(%persona_id, "generative backend returned empty text, using templates");
                None
            }
            Err(e) => {
                tracing::warn!(%persona_id, error = %e, "generative backend failed, using templates");
                None
            }
        }
    });
    let rendered = match external {
        Some(text) => Rendered {
            utterance: text,
            template_id: EXTERNAL_TEMPLATE_ID.to_string(),
        },
        None => render_utterance(request, bank, seed, turn_index),
    };
    BehaviorOutcome {
        category,
        consensus_score: consensus.consensus_score,
        dominant_agent: consensus.dominant_agent.clone(),
        utterance: rendered.utterance,
        template_id: rendered.template_id,
    }
}
