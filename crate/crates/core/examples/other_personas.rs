//! The non-classroom presets driven through the same pipeline.

use parliament::experiment::{run_scenario, Script};
use parliament::{presets, EngineOptions, SessionRuntime};

fn main() {
    let scripts = [
        (
            presets::anxious_patient(),
            Script::new([
                "We need to schedule the procedure for tomorrow.",
                "It's okay to feel nervous. I understand.",
                "We need to schedule the procedure for tomorrow.",
            ]),
        ),
        (
            presets::impatient_customer(),
            Script::new([
                "Please hold for a moment.",
                "Here's a hint: restart the router first.",
            ]),
        ),
    ];
    for (persona, script) in scripts {
        let report = run_scenario(
            &persona,
            &script,
            None,
            EngineOptions::default(),
            &SessionRuntime::default(),
        )
        .unwrap();
        println!("{}", report.summary);
    }
}
