#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use parliament::construct::{
    ConstructCategory, ConstructId, ConstructSpec, InterventionEffect, PersonaConfig,
    StanceDirection,
};
use parliament::tags::{ContextTag, InterventionTag};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

pub const ALGEBRA: &str = "Solve for x: 2x + 5 = 13";
pub const GEOMETRY: &str = "What is the area of a triangle with base 6 cm and height 8 cm?";
pub const ENCOURAGEMENT: &str = "I believe you can do this.";

pub const ID_POOL: [&str; 10] = [
    "anxiety",
    "autonomy",
    "curiosity",
    "distrust",
    "goal_pursuit",
    "math_anxiety",
    "self_efficacy",
    "spatial_reasoning",
    "threat_avoidance",
    "zeal",
];

const CATEGORIES: [ConstructCategory; 7] = [
    ConstructCategory::Personality,
    ConstructCategory::Cognition,
    ConstructCategory::Affect,
    ConstructCategory::Motivation,
    ConstructCategory::Social,
    ConstructCategory::Developmental,
    ConstructCategory::Clinical,
];

/// Utterances that exercise every tag in the default lexicon.
pub const TEXT_POOL: [&str; 12] = [
    ALGEBRA,
    GEOMETRY,
    ENCOURAGEMENT,
    "Hurry up, this is easy.",
    "Here's a hint: start by subtracting 5.",
    "Mistakes help your brain grow. You're just not there yet.",
    "It's okay to feel nervous. I understand.",
    "Come to the board and solve it in front of the class.",
    "Can you multiply 7 by 8 quickly?",
    "Let's try something new today.",
    "hello",
    "Great job! What is the perimeter of this rectangle?",
];

/// Reals on a 0.001 grid so canonical files (6 significant digits) are exact.
fn grid(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    let lo = (lo * 1000.0).round() as i64;
    let hi = (hi * 1000.0).round() as i64;
    rng.gen_range(lo..=hi) as f64 / 1000.0
}

pub fn random_persona(rng: &mut impl Rng, max_constructs: usize) -> PersonaConfig {
    let n = rng.gen_range(1..=max_constructs);
    let mut ids: Vec<&str> = ID_POOL.to_vec();
    ids.shuffle(rng);
    let constructs: Vec<ConstructSpec> = ids[..n]
        .iter()
        .map(|id| {
            let mut sensitivities = BTreeMap::new();
            for tag in ContextTag::ALL {
                if rng.gen_bool(0.4) {
                    sensitivities.insert(tag, grid(rng, -1.0, 1.0));
                }
            }
            ConstructSpec {
                id: ConstructId::new(*id),
                display_name: id.replace('_', " "),
                category: CATEGORIES[rng.gen_range(0..CATEGORIES.len())],
                stance_direction: if rng.gen_bool(0.5) {
                    StanceDirection::Approach
                } else {
                    StanceDirection::Avoid
                },
                base_activation: grid(rng, 0.0, 1.0),
                sensitivities,
                assertiveness: grid(rng, 0.0, 1.0),
                persuadability: grid(rng, 0.0, 1.0),
                theory_note: String::new(),
            }
        })
        .collect();
    let mut intervention_effects = Vec::new();
    for tag in InterventionTag::ALL {
        if rng.gen_bool(0.6) {
            let mut deltas = BTreeMap::new();
            for c in &constructs {
                if rng.gen_bool(0.5) {
                    deltas.insert(c.id.clone(), grid(rng, -0.25, 0.25));
                }
            }
            intervention_effects.push(InterventionEffect {
                intervention: tag,
                deltas,
            });
        }
    }
    PersonaConfig {
        persona_id: format!("random_{}", rng.gen::<u32>()),
        description: "generated".into(),
        constructs,
        intervention_effects,
        deliberation_rounds: if rng.gen_bool(0.5) { 2 } else { 3 },
        seed: rng.gen(),
    }
}

pub fn random_tags(rng: &mut impl Rng) -> BTreeSet<ContextTag> {
    ContextTag::ALL
        .into_iter()
        .filter(|_| rng.gen_bool(0.35))
        .collect()
}

pub fn random_modifiers(rng: &mut impl Rng, persona: &PersonaConfig) -> BTreeMap<ConstructId, f64> {
    persona
        .constructs
        .iter()
        .map(|c| (c.id.clone(), rng.gen_range(-0.5..=0.5)))
        .collect()
}

pub fn random_script(rng: &mut impl Rng, max_len: usize) -> Vec<String> {
    let n = rng.gen_range(1..=max_len);
    (0..n)
        .map(|_| TEXT_POOL[rng.gen_range(0..TEXT_POOL.len())].to_string())
        .collect()
}

// proptest strategies

fn real(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    let lo = (lo * 1000.0).round() as i64;
    let hi = (hi * 1000.0).round() as i64;
    (lo..=hi).prop_map(|k| k as f64 / 1000.0)
}

fn construct_spec(id: &'static str) -> impl Strategy<Value = ConstructSpec> {
    (
        prop::bool::ANY,
        real(0.0, 1.0),
        prop::collection::btree_map(
            prop::sample::select(ContextTag::ALL.to_vec()),
            real(-1.0, 1.0),
            0..4,
        ),
        real(0.0, 1.0),
        real(0.0, 1.0),
        prop::sample::select(CATEGORIES.to_vec()),
    )
        .prop_map(
            move |(approach, base, sensitivities, assertiveness, persuadability, category)| {
                ConstructSpec {
                    id: ConstructId::new(id),
                    display_name: id.to_string(),
                    category,
                    stance_direction: if approach {
                        StanceDirection::Approach
                    } else {
                        StanceDirection::Avoid
                    },
                    base_activation: base,
                    sensitivities,
                    assertiveness,
                    persuadability,
                    theory_note: String::new(),
                }
            },
        )
}

pub fn persona_strategy(max_constructs: usize) -> impl Strategy<Value = PersonaConfig> {
    prop::sample::subsequence(ID_POOL.to_vec(), 1..=max_constructs)
        .prop_shuffle()
        .prop_flat_map(|ids| {
            let specs: Vec<_> = ids.iter().map(|id| construct_spec(id)).collect();
            let effect = prop::collection::btree_map(
                prop::sample::select(ids.clone()).prop_map(ConstructId::new),
                real(-0.25, 0.25),
                0..3,
            );
            let effects = prop::collection::btree_map(
                prop::sample::select(InterventionTag::ALL.to_vec()),
                effect,
                0..4,
            );
            (specs, effects, prop::bool::ANY, any::<u64>())
        })
        .prop_map(|(constructs, effects, two_rounds, seed)| PersonaConfig {
            persona_id: "generated".into(),
            description: String::new(),
            constructs,
            intervention_effects: effects
                .into_iter()
                .map(|(intervention, deltas)| InterventionEffect {
                    intervention,
                    deltas,
                })
                .collect(),
            deliberation_rounds: if two_rounds { 2 } else { 3 },
            seed,
        })
}

pub fn tags_strategy() -> impl Strategy<Value = BTreeSet<ContextTag>> {
    prop::collection::btree_set(prop::sample::select(ContextTag::ALL.to_vec()), 0..4)
}

pub fn modifiers_for(persona: &PersonaConfig) -> impl Strategy<Value = BTreeMap<ConstructId, f64>> {
    let ids: Vec<ConstructId> = persona.constructs.iter().map(|c| c.id.clone()).collect();
    prop::collection::vec(-0.5f64..=0.5, ids.len())
        .prop_map(move |values| ids.iter().cloned().zip(values).collect())
}
