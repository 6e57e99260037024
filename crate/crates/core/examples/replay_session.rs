//! Save a session, replay it, then show that an edited file is caught.

use parliament::session::{replay_session_file, save_session};
use parliament::{create_session, presets, EngineOptions, SessionError, SessionRuntime};

fn main() {
    let runtime = SessionRuntime::default();
    let mut session =
        create_session(presets::math_anxious_student(), EngineOptions::default()).unwrap();
    for text in [
        "Hurry up, this is easy.",
        "Solve for x: 2x + 5 = 13",
        "It's okay to feel nervous.",
    ] {
        session.run_turn(&runtime, text).unwrap();
    }

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("session.json");
    save_session(&session, &path).unwrap();
    let replayed = replay_session_file(&path, &runtime).unwrap();
    println!("replayed {} turns with no divergence", replayed.turns.len());

    let mut doc: serde_json::Value =
        serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    doc["turns"][1]["deliberation"]["consensus_score"] = 0.0.into();
    std::fs::write(&path, serde_json::to_vec_pretty(&doc).unwrap()).unwrap();
    match replay_session_file(&path, &runtime) {
        Err(SessionError::Divergence { turn_index, field }) => {
            println!("tampered file: turn {turn_index} diverges at {field}")
        }
        other => panic!("expected a divergence, got {other:?}"),
    }
}
