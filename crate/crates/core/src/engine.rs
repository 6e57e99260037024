//! The deliberation engine.
//!
//! A turn is deliberated in rounds. Round 1 turns each construct's context
//! activation into an initial stance (`direction × activation`). Each later
//! round moves every active agent's stance toward the weight-averaged stance
//! of its active peers, by its persuadability. Activations and weights are
//! fixed after round 1. The final round is clustered into coalitions and
//! summarized by the consensus score `B`, the weight-averaged final stance.
//!
//! All updates are synchronous and every iteration runs in construct-id
//! order, so results do not depend on how the persona file lists constructs.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::construct::{ConstructId, ConstructSpec, PersonaConfig};
use crate::tags::ContextTag;

pub const DEFAULT_ABSTENTION_FLOOR: f64 = 0.10;
pub const DEFAULT_COALITION_GAP: f64 = 0.25;
pub const DEFAULT_MODIFIER_LIMIT: f64 = 0.5;

/// Per-run engine knobs. `rounds`, when set, overrides the persona's count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineOptions {
    pub abstention_floor: f64,
    pub coalition_gap: f64,
    pub modifier_limit: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rounds: Option<u8>,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            abstention_floor: DEFAULT_ABSTENTION_FLOOR,
            coalition_gap: DEFAULT_COALITION_GAP,
            modifier_limit: DEFAULT_MODIFIER_LIMIT,
            rounds: None,
        }
    }
}

impl EngineOptions {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.abstention_floor) {
            return Err(format!(
                "abstention floor {} is outside [0, 1]",
                self.abstention_floor
            ));
        }
        if !(0.0..=2.0).contains(&self.coalition_gap) {
            return Err(format!(
                "coalition gap {} is outside [0, 2]",
                self.coalition_gap
            ));
        }
        if !(0.0..=1.0).contains(&self.modifier_limit) {
            return Err(format!(
                "modifier limit {} is outside [0, 1]",
                self.modifier_limit
            ));
        }
        match self.rounds {
            Some(r) if !(2..=3).contains(&r) => Err(format!("rounds override {r} is not 2 or 3")),
            _ => Ok(()),
        }
    }

    pub fn rounds_for(&self, persona: &PersonaConfig) -> u8 {
        self.rounds.unwrap_or(persona.deliberation_rounds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRuntimeState {
    pub construct: ConstructId,
    pub activation: f64,
    /// `activation × assertiveness`
    pub weight: f64,
    pub stance: f64,
    pub active: bool,
}

impl AgentRuntimeState {
    /// Weight as seen by aggregates: inactive agents count as zero.
    pub fn effective_weight(&self) -> f64 {
        if self.active {
            self.weight
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundSnapshot {
    pub round_index: u8,
    /// One entry per construct, sorted by construct id.
    pub states: Vec<AgentRuntimeState>,
}

impl RoundSnapshot {
    pub fn state(&self, id: &ConstructId) -> Option<&AgentRuntimeState> {
        self.states.iter().find(|s| &s.construct == id)
    }

    pub fn active(&self) -> impl Iterator<Item = &AgentRuntimeState> {
        self.states.iter().filter(|s| s.active)
    }

    /// `max − min` over active stances; zero when fewer than two are active.
    pub fn stance_range(&self) -> f64 {
        let (lo, hi) = self
            .active()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                (lo.min(s.stance), hi.max(s.stance))
            });
        if lo > hi {
            0.0
        } else {
            hi - lo
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coalition {
    pub members: BTreeSet<ConstructId>,
    pub mean_stance: f64,
    pub total_weight: f64,
}

impl Coalition {
    fn empty() -> Self {
        Coalition {
            members: BTreeSet::new(),
            mean_stance: 0.0,
            total_weight: 0.0,
        }
    }

    pub fn contains(&self, id: &str) -> bool {
        self.members.iter().any(|m| m.as_str() == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusResult {
    pub consensus_score: f64,
    /// All final-round coalitions, heaviest first.
    pub coalitions: Vec<Coalition>,
    pub dominant_coalition: Coalition,
    pub dominant_agent: ConstructId,
    pub rounds: Vec<RoundSnapshot>,
}

impl ConsensusResult {
    pub fn final_round(&self) -> &RoundSnapshot {
        self.rounds.last().expect("at least one round")
    }
}

pub fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// `clamp01(base + Σ sensitivity(tag) + modifier)`. Tags the construct has no
/// sensitivity for contribute nothing.
pub fn compute_activation(
    spec: &ConstructSpec,
    context_tags: &BTreeSet<ContextTag>,
    state_modifier: f64,
) -> f64 {
    let mut a = spec.base_activation;
    for tag in context_tags {
        if let Some(s) = spec.sensitivities.get(tag) {
            a += s;
        }
    }
    clamp01(a + state_modifier)
}

/// Round 1: every construct states its initial position.
pub fn initial_positions(
    persona: &PersonaConfig,
    modifiers: &BTreeMap<ConstructId, f64>,
    context_tags: &BTreeSet<ContextTag>,
    options: &EngineOptions,
) -> RoundSnapshot {
    let mut specs: Vec<&ConstructSpec> = persona.constructs.iter().collect();
    specs.sort_by(|a, b| a.id.cmp(&b.id));
    let states = specs
        .into_iter()
        .map(|spec| {
            let m = modifiers.get(&spec.id).copied().unwrap_or(0.0);
            let activation = compute_activation(spec, context_tags, m);
            AgentRuntimeState {
                construct: spec.id.clone(),
                activation,
                weight: activation * spec.assertiveness,
                stance: spec.stance_direction.sign() * activation,
                active: activation >= options.abstention_floor,
            }
        })
        .collect();
    RoundSnapshot {
        round_index: 1,
        states,
    }
}

/// One synchronous debate round. Every agent reads `prev` only.
pub fn deliberation_round(prev: &RoundSnapshot, persona: &PersonaConfig) -> RoundSnapshot {
    let states = prev
        .states
        .iter()
        .enumerate()
        .map(|(i, agent)| {
            let mut next = agent.clone();
            if !agent.active {
                return next;
            }
            let (mut pull, mut total) = (0.0, 0.0);
            for (j, peer) in prev.states.iter().enumerate() {
                if j != i && peer.active {
                    pull += peer.weight * peer.stance;
                    total += peer.weight;
                }
            }
            if total > 0.0 {
                let lambda = persona
                    .construct(&agent.construct)
                    .map_or(0.0, |c| c.persuadability);
                let peer_mean = pull / total;
                next.stance = ((1.0 - lambda) * agent.stance + lambda * peer_mean).clamp(-1.0, 1.0);
            }
            next
        })
        .collect();
    RoundSnapshot {
        round_index: prev.round_index + 1,
        states,
    }
}

/// Single-link clustering of active agents along the stance axis: sort by
/// stance and cut wherever consecutive stances differ by more than `gap`.
/// Returned heaviest first, ties by least member id.
pub fn form_coalitions(snapshot: &RoundSnapshot, gap: f64) -> Vec<Coalition> {
    let mut active: Vec<&AgentRuntimeState> = snapshot.active().collect();
    active.sort_by(|a, b| {
        a.stance
            .total_cmp(&b.stance)
            .then_with(|| a.construct.cmp(&b.construct))
    });

    let mut segments: Vec<Vec<&AgentRuntimeState>> = Vec::new();
    for agent in active {
        match segments.last_mut() {
            Some(seg) if agent.stance - seg.last().expect("non-empty").stance <= gap => {
                seg.push(agent)
            }
            _ => segments.push(vec![agent]),
        }
    }

    let mut coalitions: Vec<Coalition> = segments
        .into_iter()
        .map(|seg| {
            let total_weight: f64 = seg.iter().map(|a| a.weight).sum();
            let mean_stance = if total_weight > 0.0 {
                seg.iter().map(|a| a.weight * a.stance).sum::<f64>() / total_weight
            } else {
                seg.iter().map(|a| a.stance).sum::<f64>() / seg.len() as f64
            };
            Coalition {
                members: seg.iter().map(|a| a.construct.clone()).collect(),
                mean_stance,
                total_weight,
            }
        })
        .collect();
    coalitions.sort_by(|a, b| {
        b.total_weight
            .total_cmp(&a.total_weight)
            .then_with(|| a.members.first().cmp(&b.members.first()))
    });
    coalitions
}

/// Weight-averaged stance of the active agents, or 0 when they carry no weight.
pub fn consensus_score(snapshot: &RoundSnapshot) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for s in snapshot.active() {
        num += s.weight * s.stance;
        den += s.weight;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Run the full deliberation for one turn.
pub fn run_deliberation(
    persona: &PersonaConfig,
    modifiers: &BTreeMap<ConstructId, f64>,
    context_tags: &BTreeSet<ContextTag>,
    options: &EngineOptions,
) -> ConsensusResult {
    let total_rounds = options.rounds_for(persona).max(1);
    let mut rounds = vec![initial_positions(persona, modifiers, context_tags, options)];
    while rounds.len() < usize::from(total_rounds) {
        let next = deliberation_round(rounds.last().expect("non-empty"), persona);
        rounds.push(next);
    }

    let last = rounds.last().expect("non-empty");
    let b = consensus_score(last);
    let coalitions = form_coalitions(last, options.coalition_gap);

    let dominant_coalition = if b == 0.0 {
        coalitions.first().cloned()
    } else {
        coalitions
            .iter()
            .find(|c| sign(c.mean_stance) == sign(b))
            .or(coalitions.first())
            .cloned()
    };

    let (dominant_coalition, dominant_agent) = match dominant_coalition {
        Some(coalition) => {
            let agent = last
                .states
                .iter()
                .filter(|s| coalition.members.contains(&s.construct))
                .fold(None::<&AgentRuntimeState>, |best, s| match best {
                    Some(b) if b.weight >= s.weight => Some(b),
                    _ => Some(s),
                })
                .expect("coalition has members")
                .construct
                .clone();
            (coalition, agent)
        }
        None => {
            // Nobody cleared the abstention floor: attribute to the loudest abstainer.
            let agent = last
                .states
                .iter()
                .fold(None::<&AgentRuntimeState>, |best, s| match best {
                    Some(b) if b.activation >= s.activation => Some(b),
                    _ => Some(s),
                })
                .expect("persona has constructs")
                .construct
                .clone();
            (Coalition::empty(), agent)
        }
    };

    ConsensusResult {
        consensus_score: b,
        coalitions,
        dominant_coalition,
        dominant_agent,
        rounds,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construct::{presets, ConstructCategory, StanceDirection};

    fn tags(list: &[ContextTag]) -> BTreeSet<ContextTag> {
        list.iter().copied().collect()
    }

    fn spec(
        id: &str,
        dir: StanceDirection,
        base: f64,
        assert: f64,
        persuade: f64,
    ) -> ConstructSpec {
        ConstructSpec {
            id: id.into(),
            display_name: id.to_string(),
            category: ConstructCategory::Affect,
            stance_direction: dir,
            base_activation: base,
            sensitivities: BTreeMap::new(),
            assertiveness: assert,
            persuadability: persuade,
            theory_note: String::new(),
        }
    }

    fn persona(constructs: Vec<ConstructSpec>) -> PersonaConfig {
        PersonaConfig {
            persona_id: "test".into(),
            description: String::new(),
            constructs,
            intervention_effects: vec![],
            deliberation_rounds: 3,
            seed: 0,
        }
    }

    fn snapshot(stances: &[(&str, f64, f64)]) -> RoundSnapshot {
        RoundSnapshot {
            round_index: 1,
            states: stances
                .iter()
                .map(|&(id, stance, weight)| AgentRuntimeState {
                    construct: id.into(),
                    activation: stance.abs(),
                    weight,
                    stance,
                    active: true,
                })
                .collect(),
        }
    }

    #[test]
    fn activation_examples() {
        let p = presets::math_anxious_student();
        let ma = p.construct(&"math_anxiety".into()).unwrap();
        assert!((compute_activation(ma, &tags(&[ContextTag::Algebra]), 0.0) - 0.80).abs() < 1e-12);
        assert!((compute_activation(ma, &tags(&[ContextTag::Geometry]), 0.0) - 0.20).abs() < 1e-12);
        for c in &p.constructs {
            assert_eq!(
                compute_activation(c, &BTreeSet::new(), 0.0),
                c.base_activation
            );
        }
    }

    #[test]
    fn activation_clamps() {
        let s = spec("a", StanceDirection::Approach, 0.9, 1.0, 0.0);
        assert_eq!(compute_activation(&s, &BTreeSet::new(), 0.5), 1.0);
        assert_eq!(compute_activation(&s, &BTreeSet::new(), -1.5), 0.0);
    }

    #[test]
    fn preset_initial_positions_on_algebra() {
        let p = presets::math_anxious_student();
        let snap = initial_positions(
            &p,
            &BTreeMap::new(),
            &tags(&[ContextTag::Algebra]),
            &EngineOptions::default(),
        );
        assert_eq!(snap.round_index, 1);
        let ids: Vec<_> = snap.states.iter().map(|s| s.construct.as_str()).collect();
        assert_eq!(
            ids,
            [
                "goal_pursuit",
                "math_anxiety",
                "procedural_fluency",
                "self_efficacy",
                "spatial_reasoning",
                "threat_avoidance"
            ]
        );
        let ma = snap.state(&"math_anxiety".into()).unwrap();
        assert!((ma.stance + 0.80).abs() < 1e-12);
        let se = snap.state(&"self_efficacy".into()).unwrap();
        assert!((se.stance - 0.10).abs() < 1e-12);
        assert!(se.active, "0.10 sits exactly on the abstention floor");
        let sr = snap.state(&"spatial_reasoning".into()).unwrap();
        assert!((sr.activation - 0.05).abs() < 1e-12);
        assert!(!sr.active);
        for s in &snap.states {
            let c = p.construct(&s.construct).unwrap();
            assert!((s.weight - s.activation * c.assertiveness).abs() < 1e-12);
        }
    }

    #[test]
    fn single_full_approach_agent() {
        let p = persona(vec![spec("a", StanceDirection::Approach, 1.0, 1.0, 0.5)]);
        let snap = initial_positions(
            &p,
            &BTreeMap::new(),
            &BTreeSet::new(),
            &EngineOptions::default(),
        );
        assert_eq!(snap.states.len(), 1);
        assert_eq!(snap.states[0].stance, 1.0);
        assert!(snap.states[0].active);
    }

    #[test]
    fn all_below_floor() {
        let p = persona(vec![
            spec("a", StanceDirection::Approach, 0.05, 1.0, 0.5),
            spec("b", StanceDirection::Avoid, 0.09, 1.0, 0.5),
        ]);
        let result = run_deliberation(
            &p,
            &BTreeMap::new(),
            &BTreeSet::new(),
            &EngineOptions::default(),
        );
        assert!(result.final_round().states.iter().all(|s| !s.active));
        assert_eq!(result.final_round().states[1].stance, -0.09);
        assert_eq!(result.consensus_score, 0.0);
        assert!(result.coalitions.is_empty());
        assert!(result.dominant_coalition.members.is_empty());
        assert_eq!(result.dominant_agent.as_str(), "b");
    }

    #[test]
    fn zero_active_fallback_breaks_ties_lexicographically() {
        let p = persona(vec![
            spec("zeta", StanceDirection::Approach, 0.05, 1.0, 0.5),
            spec("alpha", StanceDirection::Avoid, 0.05, 1.0, 0.5),
        ]);
        let result = run_deliberation(
            &p,
            &BTreeMap::new(),
            &BTreeSet::new(),
            &EngineOptions::default(),
        );
        assert_eq!(result.dominant_agent.as_str(), "alpha");
    }

    #[test]
    fn persuadability_zero_is_a_fixed_point() {
        let p = persona(vec![
            spec("a", StanceDirection::Approach, 1.0, 0.5, 0.0),
            spec("b", StanceDirection::Avoid, 1.0, 0.5, 0.0),
        ]);
        let prev = snapshot(&[("a", 1.0, 0.5), ("b", -1.0, 0.5)]);
        let next = deliberation_round(&prev, &p);
        assert_eq!(next.round_index, 2);
        assert_eq!(next.states[0].stance, 1.0);
        assert_eq!(next.states[1].stance, -1.0);
    }

    #[test]
    fn persuadability_one_swaps_positions() {
        let p = persona(vec![
            spec("a", StanceDirection::Approach, 1.0, 0.5, 1.0),
            spec("b", StanceDirection::Avoid, 1.0, 0.5, 1.0),
        ]);
        let prev = snapshot(&[("a", 1.0, 0.5), ("b", -1.0, 0.5)]);
        let next = deliberation_round(&prev, &p);
        assert_eq!(next.states[0].stance, -1.0);
        assert_eq!(next.states[1].stance, 1.0);
    }

    #[test]
    fn lone_active_agent_keeps_stance() {
        let p = persona(vec![
            spec("a", StanceDirection::Approach, 0.6, 0.5, 1.0),
            spec("b", StanceDirection::Avoid, 0.0, 0.5, 1.0),
        ]);
        let mut prev = snapshot(&[("a", 0.6, 0.3), ("b", 0.0, 0.0)]);
        prev.states[1].active = false;
        let next = deliberation_round(&prev, &p);
        assert_eq!(next.states[0].stance, 0.6);
    }

    #[test]
    fn self_efficacy_pulled_negative_on_algebra() {
        let p = presets::math_anxious_student();
        let r1 = initial_positions(
            &p,
            &BTreeMap::new(),
            &tags(&[ContextTag::Algebra]),
            &EngineOptions::default(),
        );
        let r2 = deliberation_round(&r1, &p);
        let se = r2.state(&"self_efficacy".into()).unwrap();
        // frozen from the hand-computed reference: 0.5·0.1 + 0.5·(−0.543/1.35)
        assert!(
            (se.stance - (-0.151_111_111_111_111)).abs() < 1e-9,
            "{}",
            se.stance
        );
        assert!(se.stance < 0.0);
    }

    #[test]
    fn coalition_examples() {
        let snap = snapshot(&[("a", 0.9, 0.5), ("b", 0.8, 0.5), ("c", -0.7, 0.5)]);
        let cs = form_coalitions(&snap, 0.25);
        assert_eq!(cs.len(), 2);
        assert_eq!(cs[0].members.len(), 2);
        assert!(cs[0].contains("a") && cs[0].contains("b"));
        assert!(cs[1].contains("c"));

        let flat = snapshot(&[("a", 0.0, 0.1), ("b", 0.0, 0.2), ("c", 0.0, 0.3)]);
        assert_eq!(form_coalitions(&flat, 0.25).len(), 1);
    }

    #[test]
    fn coalition_gap_is_single_link() {
        // chain of small gaps bridges a 0.6 span
        let snap = snapshot(&[
            ("a", 0.0, 0.1),
            ("b", 0.2, 0.1),
            ("c", 0.4, 0.1),
            ("d", 0.6, 0.1),
        ]);
        assert_eq!(form_coalitions(&snap, 0.25).len(), 1);
    }

    #[test]
    fn rounds_override() {
        let p = presets::math_anxious_student();
        let opts = EngineOptions {
            rounds: Some(2),
            ..EngineOptions::default()
        };
        let r = run_deliberation(&p, &BTreeMap::new(), &BTreeSet::new(), &opts);
        assert_eq!(r.rounds.len(), 2);
        assert!(EngineOptions {
            rounds: Some(5),
            ..opts
        }
        .validate()
        .is_err());
    }

    #[test]
    fn zero_consensus_picks_heaviest_coalition() {
        let p = persona(vec![
            spec("a", StanceDirection::Approach, 0.5, 0.5, 0.0),
            spec("b", StanceDirection::Avoid, 0.5, 0.5, 0.0),
        ]);
        let r = run_deliberation(
            &p,
            &BTreeMap::new(),
            &BTreeSet::new(),
            &EngineOptions::default(),
        );
        assert_eq!(r.consensus_score, 0.0);
        assert_eq!(r.coalitions.len(), 2);
        // equal weight: tie broken by least member id
        assert!(r.dominant_coalition.contains("a"));
    }
}
