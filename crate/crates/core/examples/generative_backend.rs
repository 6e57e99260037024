//! Plug in a text generator. Its text replaces the template line but never
//! the deliberation, so a replay without it still matches.

use std::sync::Arc;

use parliament::session::replay_session;
use parliament::synth::{BackendError, BackendRequest, GenerativeBackend};
use parliament::{create_session, presets, EngineOptions, SessionRuntime};

struct Mumbler;

impl GenerativeBackend for Mumbler {
    fn generate(&self, request: &BackendRequest) -> Result<String, BackendError> {
        Ok(format!(
            "({} speaking, after {} rounds) hmm, {}...",
            request.dominant_agent,
            request.rounds.len(),
            request.category.as_str().replace('_', " ")
        ))
    }
}

fn main() {
    let runtime = SessionRuntime::default().with_backend(Arc::new(Mumbler));
    let mut session =
        create_session(presets::math_anxious_student(), EngineOptions::default()).unwrap();
    for text in [
        "Solve for x: 2x + 5 = 13",
        "What is the area of a triangle with base 6 cm and height 8 cm?",
    ] {
        let turn = session.run_turn(&runtime, text).unwrap();
        println!("[{}] {}", turn.outcome.template_id, turn.outcome.utterance);
    }
    replay_session(&session, &SessionRuntime::default()).unwrap();
    println!("replay without the backend: identical");
}
