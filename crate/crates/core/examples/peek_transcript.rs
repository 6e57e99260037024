//! Round-by-round view of one deliberation, with each active agent's line.

use parliament::{create_session, presets, EngineOptions, SessionRuntime};

fn main() {
    let mut session =
        create_session(presets::math_anxious_student(), EngineOptions::default()).unwrap();
    session
        .run_turn(&SessionRuntime::default(), "Solve for x: 2x + 5 = 13")
        .unwrap();

    let record = session.peek(1).unwrap();
    println!(
        "{} / turn {}: {}",
        record.persona_id, record.turn_index, record.user_text
    );
    for round in &record.rounds {
        println!("round {}", round.round_index);
        for a in &round.agents {
            let mark = if a.active { ' ' } else { '-' };
            println!(
                "  {mark} {:<20} a={:.3} w={:.3} s={:+.4}  {}",
                a.display_name,
                a.activation,
                a.weight,
                a.stance,
                a.line.as_deref().unwrap_or("")
            );
        }
    }
    println!(
        "B = {:+.4}, dominant {} -> \"{}\"",
        record.consensus_score, record.dominant_agent, record.outcome.utterance
    );

    // the same record, as the service returns it
    println!(
        "{}",
        serde_json::to_string_pretty(&record.rounds[0].agents[0]).unwrap()
    );
}
