//! Multi-turn sessions: interventions, per-turn deliberation, the stored
//! "peek into the brain" transcript, persistence and bit-exact replay.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::construct::{validate_persona, ConstructId, PersonaConfig, ValidationReport};
use crate::engine::{run_deliberation, Coalition, ConsensusResult, EngineOptions, RoundSnapshot};
use crate::synth::{
    default_templates, render_utterance, synthesize, BehaviorCategory, BehaviorOutcome,
    GenerativeBackend, RenderRequest, TemplateBank, EXTERNAL_TEMPLATE_ID,
};
use crate::tagger::{default_lexicon, tag_stimulus, Lexicon, Stimulus, TagSet};

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("invalid persona: {0}")]
    InvalidPersona(ValidationReport),
    #[error("invalid engine options: {0}")]
    InvalidOptions(String),
    #[error("user text is empty")]
    EmptyText,
    #[error("no turn {0} in this session")]
    UnknownTurn(u32),
    #[error("session parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("replay diverged at turn {turn_index}: `{field}` differs")]
    Divergence { turn_index: u32, field: String },
    #[error("session io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Lexicon, template bank and optional generative backend shared by turns.
#[derive(Clone)]
pub struct SessionRuntime {
    pub lexicon: Lexicon,
    pub templates: TemplateBank,
    pub backend: Option<Arc<dyn GenerativeBackend>>,
}

impl Default for SessionRuntime {
    fn default() -> Self {
        SessionRuntime {
            lexicon: default_lexicon(),
            templates: default_templates(),
            backend: None,
        }
    }
}

impl SessionRuntime {
    pub fn with_backend(mut self, backend: Arc<dyn GenerativeBackend>) -> Self {
        self.backend = Some(backend);
        self
    }

    fn without_backend(&self) -> SessionRuntime {
        SessionRuntime {
            backend: None,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaState {
    pub persona: PersonaConfig,
    /// Accumulated intervention effects, one entry per construct.
    pub modifiers: BTreeMap<ConstructId, f64>,
}

impl PersonaState {
    pub fn new(persona: PersonaConfig) -> Self {
        let modifiers = persona
            .constructs
            .iter()
            .map(|c| (c.id.clone(), 0.0))
            .collect();
        PersonaState { persona, modifiers }
    }

    /// Add each tag's effect deltas, clamping to `±limit` after every step.
    pub fn apply_interventions(&mut self, tags: &TagSet, limit: f64) {
        for tag in &tags.intervention_tags {
            let Some(effect) = self.persona.effect(*tag) else {
                continue;
            };
            for (id, delta) in &effect.deltas {
                if let Some(m) = self.modifiers.get_mut(id) {
                    *m = (*m + delta).clamp(-limit, limit);
                }
            }
        }
    }
}

/// One agent's one-line voice in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentLine {
    pub construct: ConstructId,
    pub category: BehaviorCategory,
    pub utterance: String,
    pub template_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTranscript {
    pub round_index: u8,
    /// Active agents only, in construct-id order.
    pub lines: Vec<AgentLine>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub turn_index: u32,
    pub user_text: String,
    pub tags: TagSet,
    pub modifiers_before: BTreeMap<ConstructId, f64>,
    /// After this turn's interventions, i.e. what its deliberation used.
    pub modifiers_after: BTreeMap<ConstructId, f64>,
    pub deliberation: ConsensusResult,
    pub outcome: BehaviorOutcome,
    pub transcript: Vec<RoundTranscript>,
}

/// Emitted while a turn is processed.
#[derive(Debug, Clone, Copy)]
pub enum TurnEvent<'a> {
    Started {
        turn_index: u32,
        user_text: &'a str,
    },
    RoundCompleted {
        turn_index: u32,
        snapshot: &'a RoundSnapshot,
    },
    Completed {
        turn: &'a Turn,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub persona_state: PersonaState,
    pub turns: Vec<Turn>,
    pub created_at: DateTime<Utc>,
    pub engine_options: EngineOptions,
    /// Template-selection seed; the persona's seed unless overridden.
    pub seed: u64,
}

pub struct SessionBuilder {
    persona: PersonaConfig,
    options: EngineOptions,
    seed: Option<u64>,
    session_id: Option<String>,
    created_at: Option<DateTime<Utc>>,
}

impl SessionBuilder {
    pub fn options(mut self, options: EngineOptions) -> Self {
        self.options = options;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn session_id(mut self, id: impl Into<String>) -> Self {
        self.session_id = Some(id.into());
        self
    }

    pub fn created_at(mut self, at: DateTime<Utc>) -> Self {
        self.created_at = Some(at);
        self
    }

    pub fn build(self) -> Result<Session, SessionError> {
        let report = validate_persona(&self.persona);
        if !report.is_valid() {
            return Err(SessionError::InvalidPersona(report));
        }
        self.options
            .validate()
            .map_err(SessionError::InvalidOptions)?;
        Ok(Session {
            session_id: self
                .session_id
                .unwrap_or_else(|| uuid::Uuid::new_v4().simple().to_string()),
            seed: self.seed.unwrap_or(self.persona.seed),
            persona_state: PersonaState::new(self.persona),
            turns: Vec::new(),
            created_at: self.created_at.unwrap_or_else(Utc::now),
            engine_options: self.options,
        })
    }
}

/// New session with zeroed modifiers and a fresh id.
pub fn create_session(
    persona: PersonaConfig,
    options: EngineOptions,
) -> Result<Session, SessionError> {
    Session::builder(persona).options(options).build()
}

impl Session {
    pub fn builder(persona: PersonaConfig) -> SessionBuilder {
        SessionBuilder {
            persona,
            options: EngineOptions::default(),
            seed: None,
            session_id: None,
            created_at: None,
        }
    }

    pub fn persona(&self) -> &PersonaConfig {
        &self.persona_state.persona
    }

    pub fn modifiers(&self) -> &BTreeMap<ConstructId, f64> {
        &self.persona_state.modifiers
    }

    pub fn run_turn(
        &mut self,
        runtime: &SessionRuntime,
        user_text: &str,
    ) -> Result<&Turn, SessionError> {
        self.run_turn_observed(runtime, user_text, &mut |_| {})
    }

    /// Tag → apply interventions → deliberate → synthesize → append.
    pub fn run_turn_observed(
        &mut self,
        runtime: &SessionRuntime,
        user_text: &str,
        observer: &mut dyn FnMut(TurnEvent<'_>),
    ) -> Result<&Turn, SessionError> {
        let turn_index = self.turns.len() as u32 + 1;
        let stimulus = Stimulus::new(user_text, turn_index);
        if !stimulus.is_valid() {
            return Err(SessionError::EmptyText);
        }
        observer(TurnEvent::Started {
            turn_index,
            user_text,
        });

        let tags = tag_stimulus(&stimulus, &runtime.lexicon);
        let modifiers_before = self.persona_state.modifiers.clone();
        self.persona_state
            .apply_interventions(&tags, self.engine_options.modifier_limit);
        let modifiers_after = self.persona_state.modifiers.clone();

        let persona = &self.persona_state.persona;
        let deliberation = run_deliberation(
            persona,
            &modifiers_after,
            &tags.context_tags,
            &self.engine_options,
        );
        for snapshot in &deliberation.rounds {
            observer(TurnEvent::RoundCompleted {
                turn_index,
                snapshot,
            });
        }

        let display_name = |id: &ConstructId| {
            persona
                .construct(id)
                .map_or_else(|| id.as_str().to_string(), |c| c.display_name.clone())
        };
        let category = BehaviorCategory::from_score(deliberation.consensus_score);
        let dominant_name = display_name(&deliberation.dominant_agent);
        let outcome = synthesize(
            &persona.persona_id,
            &deliberation,
            &RenderRequest {
                category,
                dominant_agent: &deliberation.dominant_agent,
                display_name: &dominant_name,
                context_tags: &tags.context_tags,
            },
            &runtime.templates,
            self.seed,
            turn_index,
            runtime.backend.as_deref(),
        );

        let transcript = deliberation
            .rounds
            .iter()
            .map(|round| RoundTranscript {
                round_index: round.round_index,
                lines: round
                    .active()
                    .map(|agent| {
                        let category = BehaviorCategory::from_score(agent.stance);
                        let name = display_name(&agent.construct);
                        let rendered = render_utterance(
                            &RenderRequest {
                                category,
                                dominant_agent: &agent.construct,
                                display_name: &name,
                                context_tags: &tags.context_tags,
                            },
                            &runtime.templates,
                            self.seed,
                            turn_index,
                        );
                        AgentLine {
                            construct: agent.construct.clone(),
                            category,
                            utterance: rendered.utterance,
                            template_id: rendered.template_id,
                        }
                    })
                    .collect(),
            })
            .collect();

        self.turns.push(Turn {
            turn_index,
            user_text: user_text.to_string(),
            tags,
            modifiers_before,
            modifiers_after,
            deliberation,
            outcome,
            transcript,
        });
        let turn = self.turns.last().expect("just pushed");
        observer(TurnEvent::Completed { turn });
        Ok(turn)
    }

    pub fn turn(&self, turn_index: u32) -> Result<&Turn, SessionError> {
        turn_index
            .checked_sub(1)
            .and_then(|i| self.turns.get(i as usize))
            .ok_or(SessionError::UnknownTurn(turn_index))
    }

    /// The stored deliberation of one turn, never recomputed.
    pub fn peek(&self, turn_index: u32) -> Result<DeliberationRecord, SessionError> {
        let turn = self.turn(turn_index)?;
        let persona = self.persona();
        let rounds = turn
            .deliberation
            .rounds
            .iter()
            .map(|round| {
                let lines = turn
                    .transcript
                    .iter()
                    .find(|t| t.round_index == round.round_index);
                PeekRound {
                    round_index: round.round_index,
                    agents: round
                        .states
                        .iter()
                        .map(|s| {
                            let line = lines
                                .and_then(|t| t.lines.iter().find(|l| l.construct == s.construct));
                            PeekAgent {
                                construct: s.construct.clone(),
                                display_name: persona
                                    .construct(&s.construct)
                                    .map_or_else(String::new, |c| c.display_name.clone()),
                                activation: s.activation,
                                weight: s.weight,
                                stance: s.stance,
                                active: s.active,
                                line: line.map(|l| l.utterance.clone()),
                                line_template: line.map(|l| l.template_id.clone()),
                            }
                        })
                        .collect(),
                }
            })
            .collect();
        Ok(DeliberationRecord {
            session_id: self.session_id.clone(),
            persona_id: persona.persona_id.clone(),
            turn_index,
            user_text: turn.user_text.clone(),
            tags: turn.tags.clone(),
            modifiers_before: turn.modifiers_before.clone(),
            modifiers_after: turn.modifiers_after.clone(),
            rounds,
            coalitions: turn.deliberation.coalitions.clone(),
            dominant_coalition: turn.deliberation.dominant_coalition.clone(),
            dominant_agent: turn.deliberation.dominant_agent.clone(),
            consensus_score: turn.deliberation.consensus_score,
            outcome: turn.outcome.clone(),
        })
    }

    pub fn to_json(&self) -> Vec<u8> {
        let mut bytes = serde_json::to_vec_pretty(self).expect("session serializes");
        bytes.push(b'\n');
        bytes
    }

    pub fn from_json(bytes: &[u8]) -> Result<Session, SessionError> {
        serde_json::from_slice(bytes).map_err(|e| SessionError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeekAgent {
    pub construct: ConstructId,
    pub display_name: String,
    pub activation: f64,
    pub weight: f64,
    pub stance: f64,
    pub active: bool,
    pub line: Option<String>,
    pub line_template: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeekRound {
    pub round_index: u8,
    pub agents: Vec<PeekAgent>,
}

/// "Peek into the brain" view of one turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeliberationRecord {
    pub session_id: String,
    pub persona_id: String,
    pub turn_index: u32,
    pub user_text: String,
    pub tags: TagSet,
    pub modifiers_before: BTreeMap<ConstructId, f64>,
    pub modifiers_after: BTreeMap<ConstructId, f64>,
    pub rounds: Vec<PeekRound>,
    pub coalitions: Vec<Coalition>,
    pub dominant_coalition: Coalition,
    pub dominant_agent: ConstructId,
    pub consensus_score: f64,
    pub outcome: BehaviorOutcome,
}

/// Write via a temp file in the same directory, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn save_session(session: &Session, path: impl AsRef<Path>) -> Result<(), SessionError> {
    Ok(write_atomic(path.as_ref(), &session.to_json())?)
}

pub fn load_session(path: impl AsRef<Path>) -> Result<Session, SessionError> {
    Session::from_json(&std::fs::read(path)?)
}

fn first_difference(path: &str, expected: &Value, actual: &Value) -> Option<String> {
    match (expected, actual) {
        (Value::Object(a), Value::Object(b)) => {
            for (key, va) in a {
                let sub = format!("{path}.{key}");
                match b.get(key) {
                    Some(vb) => {
                        if let Some(found) = first_difference(&sub, va, vb) {
                            return Some(found);
                        }
                    }
                    None => return Some(sub),
                }
            }
            b.keys()
                .find(|k| !a.contains_key(*k))
                .map(|k| format!("{path}.{k}"))
        }
        (Value::Array(a), Value::Array(b)) => {
            for (i, (va, vb)) in a.iter().zip(b).enumerate() {
                if let Some(found) = first_difference(&format!("{path}[{i}]"), va, vb) {
                    return Some(found);
                }
            }
            (a.len() != b.len()).then(|| format!("{path}.len"))
        }
        _ => (expected != actual).then(|| path.to_string()),
    }
}

/// Re-run the stored user texts from a fresh persona state and check that
/// every recomputed turn equals the stored one. Generative-backend text is
/// display-only, so turns rendered externally keep their stored utterance.
pub fn replay_session(stored: &Session, runtime: &SessionRuntime) -> Result<Session, SessionError> {
    let runtime = runtime.without_backend();
    let mut replayed = Session::builder(stored.persona().clone())
        .options(stored.engine_options)
        .seed(stored.seed)
        .session_id(stored.session_id.clone())
        .created_at(stored.created_at)
        .build()?;
    for original in &stored.turns {
        replayed.run_turn(&runtime, &original.user_text)?;
        let recomputed = replayed.turns.last_mut().expect("just ran");
        if original.outcome.template_id == EXTERNAL_TEMPLATE_ID {
            recomputed.outcome.utterance = original.outcome.utterance.clone();
            recomputed.outcome.template_id = original.outcome.template_id.clone();
        }
        let a = serde_json::to_value(original).expect("turn serializes");
        let b = serde_json::to_value(&*recomputed).expect("turn serializes");
        if let Some(field) = first_difference("", &a, &b) {
            return Err(SessionError::Divergence {
                turn_index: original.turn_index,
                field: field.trim_start_matches('.').to_string(),
            });
        }
    }
    if replayed.persona_state != stored.persona_state {
        return Err(SessionError::Divergence {
            turn_index: stored.turns.len() as u32,
            field: "persona_state.modifiers".into(),
        });
    }
    Ok(replayed)
}

pub fn replay_session_file(
    path: impl AsRef<Path>,
    runtime: &SessionRuntime,
) -> Result<Session, SessionError> {
    replay_session(&load_session(path)?, runtime)
}

/// `sessions/<session_id>.json`
#[derive(Debug, Clone)]
pub struct SessionStore {
    dir: PathBuf,
}

impl SessionStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        SessionStore { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, session_id: &str) -> PathBuf {
        self.dir.join(format!("{session_id}.json"))
    }

    pub fn save(&self, session: &Session) -> Result<(), SessionError> {
        save_session(session, self.path_for(&session.session_id))
    }

    pub fn load(&self, session_id: &str) -> Result<Session, SessionError> {
        load_session(self.path_for(session_id))
    }
}
