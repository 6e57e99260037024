//! Build a persona in code, see validation at work, and write the canonical file.

use std::collections::BTreeMap;

use parliament::construct::{ConstructCategory, InterventionEffect};
use parliament::{
    load_persona, save_persona, validate_persona, ConstructId, ConstructSpec, ContextTag,
    InterventionTag, PersonaConfig, StanceDirection,
};

fn construct(
    id: &str,
    direction: StanceDirection,
    base: f64,
    sens: &[(ContextTag, f64)],
) -> ConstructSpec {
    ConstructSpec {
        id: ConstructId::new(id),
        display_name: id.replace('_', " "),
        category: ConstructCategory::Affect,
        stance_direction: direction,
        base_activation: base,
        sensitivities: sens.iter().copied().collect(),
        assertiveness: 0.6,
        persuadability: 0.4,
        theory_note: String::new(),
    }
}

fn main() {
    let mut persona = PersonaConfig {
        persona_id: "stage_fright".into(),
        description: "Knows the material, freezes in front of people.".into(),
        constructs: vec![
            construct(
                "social_fear",
                StanceDirection::Avoid,
                0.3,
                &[(ContextTag::SocialExposure, 0.6)],
            ),
            construct(
                "competence",
                StanceDirection::Approach,
                0.6,
                &[(ContextTag::Arithmetic, 0.2)],
            ),
        ],
        intervention_effects: vec![InterventionEffect {
            intervention: InterventionTag::Validation,
            deltas: BTreeMap::from([(ConstructId::new("social_fear"), -0.1)]),
        }],
        deliberation_rounds: 2,
        seed: 7,
    };

    persona.constructs[1].assertiveness = 1.4;
    println!("{}", validate_persona(&persona));
    persona.constructs[1].assertiveness = 0.7;
    assert!(validate_persona(&persona).is_valid());

    let bytes = save_persona(&persona).unwrap();
    print!("{}", String::from_utf8_lossy(&bytes));
    assert_eq!(load_persona(&bytes).unwrap(), persona.canonicalized());
}
