mod common;

use std::collections::BTreeMap;

use common::{modifiers_for, persona_strategy, tags_strategy, TEXT_POOL};
use parliament::construct::{load_persona, presets, save_persona, validate_persona};
use parliament::engine::{
    compute_activation, deliberation_round, form_coalitions, initial_positions, run_deliberation,
    EngineOptions,
};
use parliament::session::{create_session, SessionRuntime};
use parliament::tagger::{default_lexicon, tag_stimulus, Rule, Stimulus, Tag};
use parliament::tags::{ContextTag, InterventionTag};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn generated_personas_are_valid_and_round_trip(p in persona_strategy(8)) {
        prop_assert!(validate_persona(&p).is_valid());
        let bytes = save_persona(&p).unwrap();
        let loaded = load_persona(&bytes).unwrap();
        prop_assert_eq!(&loaded, &p.canonicalized());
        prop_assert_eq!(save_persona(&loaded).unwrap(), bytes);
    }

    #[test]
    fn valid_configs_have_in_range_fields(p in persona_strategy(8)) {
        prop_assume!(validate_persona(&p).is_valid());
        for c in &p.constructs {
            prop_assert!((0.0..=1.0).contains(&c.base_activation));
            prop_assert!((0.0..=1.0).contains(&c.assertiveness));
            prop_assert!((0.0..=1.0).contains(&c.persuadability));
            prop_assert!(c.sensitivities.values().all(|s| (-1.0..=1.0).contains(s)));
        }
        for e in &p.intervention_effects {
            prop_assert!(e.deltas.values().all(|d| (-0.25..=0.25).contains(d)));
        }
    }

    #[test]
    fn one_broken_field_is_one_matching_violation(
        p in persona_strategy(6),
        which in 0usize..6,
        pick in any::<prop::sample::Index>(),
        bad in prop_oneof![Just(f64::NAN), 1.0001f64..5.0, -5.0f64..-1.0001],
    ) {
        let mut broken = p.clone();
        let i = pick.index(broken.constructs.len());
        let expected = match which {
            0 => { broken.constructs[i].base_activation = bad; format!("constructs[{i}].base_activation") }
            1 => { broken.constructs[i].assertiveness = bad; format!("constructs[{i}].assertiveness") }
            2 => { broken.constructs[i].persuadability = bad; format!("constructs[{i}].persuadability") }
            3 => {
                broken.constructs[i].sensitivities.insert(ContextTag::Algebra, bad.signum() * 1.5);
                format!("constructs[{i}].sensitivities.algebra")
            }
            4 => { broken.deliberation_rounds = 7; "deliberation_rounds".to_string() }
            _ => { broken.constructs[i].id = "Not-An-Id".into();
                   // effects may name the old id; drop them so only the id breaks
                   broken.intervention_effects.clear();
                   format!("constructs[{i}].id") }
        };
        let report = validate_persona(&broken);
        prop_assert_eq!(report.violations.len(), 1, "{}", report);
        prop_assert_eq!(&report.violations[0].path, &expected);
    }

    #[test]
    fn activation_in_unit_interval_and_monotone(
        p in persona_strategy(1),
        tags in tags_strategy(),
        m in -0.5f64..=0.5,
        dm in 0.0f64..=0.5,
    ) {
        let spec = &p.constructs[0];
        let a = compute_activation(spec, &tags, m);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(compute_activation(spec, &tags, (m + dm).min(0.5)) >= a);
        let mut louder = spec.clone();
        louder.base_activation = (louder.base_activation + dm).min(1.0);
        prop_assert!(compute_activation(&louder, &tags, m) >= a);
    }

    #[test]
    fn deliberation_invariants(
        (p, mods) in persona_strategy(8).prop_flat_map(|p| { let m = modifiers_for(&p); (Just(p), m) }),
        tags in tags_strategy(),
    ) {
        let options = EngineOptions::default();
        let result = run_deliberation(&p, &mods, &tags, &options);
        prop_assert_eq!(result.rounds.len(), usize::from(p.deliberation_rounds));
        for (k, r) in result.rounds.iter().enumerate() {
            prop_assert_eq!(usize::from(r.round_index), k + 1);
            prop_assert_eq!(r.states.len(), p.constructs.len());
        }
        for pair in result.rounds.windows(2) {
            prop_assert!(pair[1].stance_range() <= pair[0].stance_range() + 1e-12);
        }
        let last = result.final_round();
        let active: Vec<_> = last.active().collect();
        if active.is_empty() {
            prop_assert_eq!(result.consensus_score, 0.0);
        } else {
            let lo = active.iter().map(|s| s.stance).fold(f64::INFINITY, f64::min);
            let hi = active.iter().map(|s| s.stance).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(result.consensus_score >= lo - 1e-12 && result.consensus_score <= hi + 1e-12);
        }
        let mut covered: Vec<_> = result.coalitions.iter().flat_map(|c| c.members.iter().cloned()).collect();
        covered.sort();
        let mut expected: Vec<_> = active.iter().map(|s| s.construct.clone()).collect();
        expected.sort();
        prop_assert_eq!(covered, expected);
    }

    #[test]
    fn construct_order_does_not_matter(
        p in persona_strategy(8),
        tags in tags_strategy(),
        seed in any::<u64>(),
    ) {
        let mut shuffled = p.clone();
        let n = shuffled.constructs.len();
        for i in (1..n).rev() {
            let j = (seed.rotate_left(i as u32) % (i as u64 + 1)) as usize;
            shuffled.constructs.swap(i, j);
        }
        let a = run_deliberation(&p, &BTreeMap::new(), &tags, &EngineOptions::default());
        let b = run_deliberation(&shuffled, &BTreeMap::new(), &tags, &EngineOptions::default());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn rounds_are_synchronous(p in persona_strategy(8), tags in tags_strategy()) {
        // running one round from a reversed snapshot order gives the same stances
        let r1 = initial_positions(&p, &BTreeMap::new(), &tags, &EngineOptions::default());
        let forward = deliberation_round(&r1, &p);
        let mut reversed = r1.clone();
        reversed.states.reverse();
        let mut backward = deliberation_round(&reversed, &p);
        backward.states.reverse();
        for (f, b) in forward.states.iter().zip(&backward.states) {
            prop_assert!((f.stance - b.stance).abs() < 1e-12);
        }
    }

    #[test]
    fn coalitions_are_heaviest_first(p in persona_strategy(8), tags in tags_strategy()) {
        let r = run_deliberation(&p, &BTreeMap::new(), &tags, &EngineOptions::default());
        let cs = form_coalitions(r.final_round(), 0.25);
        for pair in cs.windows(2) {
            prop_assert!(pair[0].total_weight >= pair[1].total_weight);
        }
    }

    #[test]
    fn tagging_is_deterministic_and_closed(text in "[ -~]{1,60}") {
        let lex = default_lexicon();
        let a = tag_stimulus(&Stimulus::new(text.clone(), 1), &lex);
        let b = tag_stimulus(&Stimulus::new(text, 1), &lex);
        prop_assert_eq!(&a, &b);
        prop_assert!(!a.context_tags.is_empty());
        prop_assert!(a.context_tags.iter().all(|t| ContextTag::ALL.contains(t)));
        prop_assert!(a.intervention_tags.iter().all(|t| InterventionTag::ALL.contains(t)));
    }

    #[test]
    fn adding_a_rule_never_removes_tags(
        text_idx in 0usize..TEXT_POOL.len(),
        pattern in "[a-z]{2,6}",
        context in prop::bool::ANY,
        tag_idx in 0usize..6,
    ) {
        let text = TEXT_POOL[text_idx];
        let lex = default_lexicon();
        let before = tag_stimulus(&Stimulus::new(text, 1), &lex);
        let mut extended = lex.clone();
        let emits = if context {
            Tag::Context(ContextTag::ALL[tag_idx])
        } else {
            Tag::Intervention(InterventionTag::ALL[tag_idx])
        };
        extended.push(Rule::new(pattern, emits).unwrap());
        let after = tag_stimulus(&Stimulus::new(text, 1), &extended);
        prop_assert!(before.intervention_tags.is_subset(&after.intervention_tags));
        for t in &before.context_tags {
            if after.context_tags.contains(t) {
                continue;
            }
            // only the fallback may disappear, and only because a real context tag arrived
            prop_assert_eq!(*t, ContextTag::NovelTask);
            prop_assert!(after.context_tags.iter().any(|t| *t != ContextTag::NovelTask));
        }
    }

    #[test]
    fn modifiers_stay_clamped(
        p in persona_strategy(6),
        script in prop::collection::vec(0usize..TEXT_POOL.len(), 1..25),
    ) {
        let rt = SessionRuntime::default();
        let mut s = create_session(p, EngineOptions::default()).unwrap();
        for i in script {
            let before = s.modifiers().clone();
            let turn = s.run_turn(&rt, TEXT_POOL[i]).unwrap().clone();
            prop_assert!(turn.modifiers_after.values().all(|m| (-0.5..=0.5).contains(m)));
            prop_assert_eq!(&turn.modifiers_before, &before);
            // a lone intervention with a positive delta never lowers that modifier
            if turn.tags.intervention_tags.len() == 1 {
                let tag = *turn.tags.intervention_tags.iter().next().unwrap();
                if let Some(effect) = s.persona().effect(tag) {
                    for (id, d) in &effect.deltas {
                        if *d > 0.0 {
                            prop_assert!(turn.modifiers_after[id] >= before[id]);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn preset_file_round_trips_byte_identically() {
    let text = presets::MATH_ANXIOUS_STUDENT.as_bytes();
    assert_eq!(save_persona(&load_persona(text).unwrap()).unwrap(), text);
}
