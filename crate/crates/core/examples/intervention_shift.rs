//! Encouragement accumulates in the persona's modifiers and tips a later
//! algebra question away from avoidance.

use parliament::{create_session, presets, EngineOptions, SessionRuntime};

fn main() {
    let runtime = SessionRuntime::default();
    let algebra = "Solve for x: 2x + 5 = 13";

    let mut cold =
        create_session(presets::math_anxious_student(), EngineOptions::default()).unwrap();
    let before = cold
        .run_turn(&runtime, algebra)
        .unwrap()
        .deliberation
        .consensus_score;

    let mut warm =
        create_session(presets::math_anxious_student(), EngineOptions::default()).unwrap();
    for _ in 0..3 {
        let turn = warm
            .run_turn(&runtime, "I believe you can do this.")
            .unwrap();
        println!(
            "turn {} {:?}: {:?}",
            turn.turn_index, turn.tags.intervention_tags, turn.modifiers_after
        );
    }
    let turn = warm.run_turn(&runtime, algebra).unwrap();
    println!("\nalgebra cold: B = {before:+.4}");
    println!(
        "algebra after encouragement: B = {:+.4} ({}) \"{}\"",
        turn.deliberation.consensus_score,
        turn.outcome.category.as_str(),
        turn.outcome.utterance
    );
}
