//! Compare the engine against the straight-line reference recomputation.

use std::collections::{BTreeMap, BTreeSet};

use parliament::experiment::verify_oracle;
use parliament::{presets, ContextTag, EngineOptions};

fn main() {
    for persona in presets::all() {
        for tag in ContextTag::ALL {
            let tags = BTreeSet::from([tag]);
            let report =
                verify_oracle(&persona, &tags, &BTreeMap::new(), &EngineOptions::default())
                    .unwrap();
            println!(
                "{:<22} {:<15} {} rows, max |diff| {:e} {}",
                persona.persona_id,
                tag.as_str(),
                report.rows.len(),
                report.max_abs_deviation,
                if report.passed() { "ok" } else { "MISMATCH" }
            );
        }
    }
}
