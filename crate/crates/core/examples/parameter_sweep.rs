//! Sweep two persona parameters over the algebra script and print the CSV.

use parliament::experiment::{run_sweep, Script, SweepSpec};
use parliament::{presets, EngineOptions, SessionRuntime};

fn main() {
    let spec = SweepSpec::from_json(
        r#"{"axes": [
            {"path": "self_efficacy.base", "values": [0.2, 0.5, 0.8]},
            {"path": "math_anxiety.sensitivities.algebra", "values": [0.0, 0.25, 0.5]}
        ]}"#,
    )
    .unwrap();
    let script = Script::new(["I believe you can do this.", "Solve for x: 2x + 5 = 13"]);
    let result = run_sweep(
        &presets::math_anxious_student(),
        &spec,
        &script,
        EngineOptions::default(),
        &SessionRuntime::default(),
        None,
    )
    .unwrap();
    result.write_csv(std::io::stdout().lock()).unwrap();
}
