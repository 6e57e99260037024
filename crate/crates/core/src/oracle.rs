//! Straight-line reference recomputation of a deliberation.
//!
//! Shares no code with [`crate::engine`]: it works on flat vectors indexed by
//! agent and spells out the activation, update and consensus formulas
//! directly, so comparing the two catches mistakes in either.

#![allow(clippy::manual_clamp)]

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::construct::{ConstructId, PersonaConfig, StanceDirection};
use crate::engine::{ConsensusResult, EngineOptions};
use crate::tags::ContextTag;

pub const ORACLE_TOLERANCE: f64 = 1e-9;
pub const ORACLE_MAX_CONSTRUCTS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleTrace {
    /// Sorted construct ids; every vector below is indexed the same way.
    pub ids: Vec<ConstructId>,
    pub activations: Vec<f64>,
    pub weights: Vec<f64>,
    pub active: Vec<bool>,
    /// `stances[r][i]` is agent `i`'s stance after round `r + 1`.
    pub stances: Vec<Vec<f64>>,
    pub consensus_score: f64,
}

pub fn recompute(
    persona: &PersonaConfig,
    modifiers: &BTreeMap<ConstructId, f64>,
    context_tags: &BTreeSet<ContextTag>,
    options: &EngineOptions,
) -> OracleTrace {
    let mut order: Vec<usize> = (0..persona.constructs.len()).collect();
    order.sort_by(|&a, &b| persona.constructs[a].id.cmp(&persona.constructs[b].id));
    let n = order.len();

    let mut ids = Vec::with_capacity(n);
    let mut activations = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let mut active = vec![false; n];
    let mut lambdas = vec![0.0; n];
    let mut stance = vec![0.0; n];

    for (i, &k) in order.iter().enumerate() {
        let c = &persona.constructs[k];
        ids.push(c.id.clone());
        let mut raw = c.base_activation;
        for tag in ContextTag::ALL {
            if context_tags.contains(&tag) {
                raw += c.sensitivities.get(&tag).copied().unwrap_or(0.0);
            }
        }
        raw += modifiers.get(&c.id).copied().unwrap_or(0.0);
        let a = if raw < 0.0 {
            0.0
        } else if raw > 1.0 {
            1.0
        } else {
            raw
        };
        activations[i] = a;
        weights[i] = a * c.assertiveness;
        active[i] = a >= options.abstention_floor;
        lambdas[i] = c.persuadability;
        stance[i] = match c.stance_direction {
            StanceDirection::Approach => a,
            StanceDirection::Avoid => -a,
        };
    }

    let rounds = options.rounds.unwrap_or(persona.deliberation_rounds) as usize;
    let mut stances = vec![stance.clone()];
    for _ in 1..rounds {
        let prev = stances.last().unwrap().clone();
        let mut next = prev.clone();
        for i in 0..n {
            if !active[i] {
                continue;
            }
            let mut num = 0.0;
            let mut den = 0.0;
            for j in 0..n {
                if j == i || !active[j] {
                    continue;
                }
                num += weights[j] * prev[j];
                den += weights[j];
            }
            if den <= 0.0 {
                continue;
            }
            let moved = (1.0 - lambdas[i]) * prev[i] + lambdas[i] * (num / den);
            next[i] = moved.max(-1.0).min(1.0);
        }
        stances.push(next);
    }

    let last = stances.last().unwrap();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        if active[i] {
            num += weights[i] * last[i];
            den += weights[i];
        }
    }
    let consensus_score = if den > 0.0 { num / den } else { 0.0 };

    OracleTrace {
        ids,
        activations,
        weights,
        active,
        stances,
        consensus_score,
    }
}

/// One engine-vs-oracle comparison line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Deviation {
    pub round_index: usize,
    pub construct: Option<ConstructId>,
    pub quantity: &'static str,
    pub engine: f64,
    pub oracle: f64,
}

impl Deviation {
    pub fn abs(&self) -> f64 {
        (self.engine - self.oracle).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub rows: Vec<Deviation>,
    pub max_abs_deviation: f64,
    /// Structural mismatches (round count, agent order, activity flags).
    pub mismatches: Vec<String>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty() && self.max_abs_deviation <= ORACLE_TOLERANCE
    }
}

/// Side-by-side comparison of an engine result with the reference.
pub fn compare(engine: &ConsensusResult, oracle: &OracleTrace) -> OracleReport {
    let mut rows = Vec::new();
    let mut mismatches = Vec::new();
    if engine.rounds.len() != oracle.stances.len() {
        mismatches.push(format!(
            "engine ran {} rounds, oracle {}",
            engine.rounds.len(),
            oracle.stances.len()
        ));
    }
    for (r, (snapshot, stances)) in engine.rounds.iter().zip(&oracle.stances).enumerate() {
        if snapshot.states.len() != oracle.ids.len() {
            mismatches.push(format!("round {}: agent count differs", r + 1));
            continue;
        }
        for (i, state) in snapshot.states.iter().enumerate() {
            if state.construct != oracle.ids[i] {
                mismatches.push(format!(
                    "round {}: agent {i} is {} vs {}",
                    r + 1,
                    state.construct,
                    oracle.ids[i]
                ));
            }
            if state.active != oracle.active[i] {
                mismatches.push(format!(
                    "round {}: {} activity differs",
                    r + 1,
                    state.construct
                ));
            }
            let id = Some(state.construct.clone());
            if r == 0 {
                rows.push(Deviation {
                    round_index: 1,
                    construct: id.clone(),
                    quantity: "activation",
                    engine: state.activation,
                    oracle: oracle.activations[i],
                });
            }
            rows.push(Deviation {
                round_index: r + 1,
                construct: id.clone(),
                quantity: "weight",
                engine: state.weight,
                oracle: oracle.weights[i],
            });
            rows.push(Deviation {
                round_index: r + 1,
                construct: id,
                quantity: "stance",
                engine: state.stance,
                oracle: stances[i],
            });
        }
    }
    rows.push(Deviation {
        round_index: oracle.stances.len(),
        construct: None,
        quantity: "consensus",
        engine: engine.consensus_score,
        oracle: oracle.consensus_score,
    });
    let max_abs_deviation = rows.iter().map(Deviation::abs).fold(0.0, f64::max);
    OracleReport {
        rows,
        max_abs_deviation,
        mismatches,
    }
}
