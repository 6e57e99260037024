//! The same persona facing an algebra problem and then a geometry problem.

use parliament::{create_session, presets, EngineOptions, SessionRuntime};

fn main() {
    let runtime = SessionRuntime::default();
    let mut session =
        create_session(presets::math_anxious_student(), EngineOptions::default()).unwrap();

    for text in [
        "Solve for x: 2x + 5 = 13",
        "What is the area of a triangle with base 6 cm and height 8 cm?",
    ] {
        let turn = session.run_turn(&runtime, text).unwrap();
        let d = &turn.deliberation;
        println!("teacher: {text}");
        println!("  tags: {:?}", turn.tags.context_tags);
        println!(
            "  B = {:+.4} -> {}, dominant {}",
            d.consensus_score,
            turn.outcome.category.as_str(),
            d.dominant_agent
        );
        for c in &d.coalitions {
            let members: Vec<_> = c.members.iter().map(|m| m.as_str()).collect();
            println!(
                "  coalition {members:?} mean {:+.3} weight {:.3}",
                c.mean_stance, c.total_weight
            );
        }
        println!("student: {}\n", turn.outcome.utterance);
    }
}
