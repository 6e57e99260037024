//! An "inner parliament" engine: a persona is a set of psychological
//! construct-agents that deliberate over each user utterance. The result of
//! their debate decides what the persona says, and the whole debate is kept
//! as an inspectable transcript.
//!
//! The pipeline for one turn is
//! [`tagger::tag_stimulus`] → intervention effects → [`engine::run_deliberation`]
//! → [`synth::synthesize`], driven by [`session::Session::run_turn`].

pub mod canonical;
pub mod construct;
pub mod engine;
pub mod experiment;
pub mod oracle;
pub mod service;
pub mod session;
pub mod synth;
pub mod tagger;
pub mod tags;

pub use construct::{
    load_persona, load_persona_file, presets, save_persona, validate_persona, ConstructId,
    ConstructSpec, PersonaConfig, PersonaError, StanceDirection, ValidationReport,
};
pub use engine::{run_deliberation, ConsensusResult, EngineOptions, RoundSnapshot};
pub use session::{
    create_session, replay_session, DeliberationRecord, Session, SessionError, SessionRuntime, Turn,
};
pub use synth::{BehaviorCategory, BehaviorOutcome};
pub use tagger::{default_lexicon, tag_stimulus, Lexicon, Stimulus, TagSet};
pub use tags::{ContextTag, InterventionTag};
