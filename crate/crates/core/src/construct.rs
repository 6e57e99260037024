//! Psychological constructs, persona configuration files and shipped presets.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::canonical;
use crate::tags::{ContextTag, InterventionTag};

pub const MAX_CONSTRUCTS: usize = 16;
pub const MAX_EFFECT_DELTA: f64 = 0.25;
pub const DEFAULT_ROUNDS: u8 = 3;

/// Identifier of a construct-agent, e.g. `math_anxiety`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConstructId(String);

impl ConstructId {
    pub fn new(id: impl Into<String>) -> Self {
        ConstructId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// `[a-z][a-z0-9_]*`
    pub fn is_well_formed(&self) -> bool {
        let mut chars = self.0.chars();
        match chars.next() {
            Some(c) if c.is_ascii_lowercase() => {}
            _ => return false,
        }
        chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
    }
}

impl fmt::Display for ConstructId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for ConstructId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let id = ConstructId::new(s);
        if id.is_well_formed() {
            Ok(id)
        } else {
            Err(format!("`{s}` is not a construct id"))
        }
    }
}

impl From<&str> for ConstructId {
    fn from(s: &str) -> Self {
        ConstructId::new(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstructCategory {
    Personality,
    Cognition,
    Affect,
    Motivation,
    Social,
    Developmental,
    Clinical,
}

/// Which way an engaged construct pushes behavior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StanceDirection {
    Approach,
    Avoid,
}

impl StanceDirection {
    pub fn sign(self) -> f64 {
        match self {
            StanceDirection::Approach => 1.0,
            StanceDirection::Avoid => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructSpec {
    pub id: ConstructId,
    pub display_name: String,
    pub category: ConstructCategory,
    pub stance_direction: StanceDirection,
    pub base_activation: f64,
    #[serde(default)]
    pub sensitivities: BTreeMap<ContextTag, f64>,
    pub assertiveness: f64,
    pub persuadability: f64,
    #[serde(default)]
    pub theory_note: String,
}

impl ConstructSpec {
    pub fn sensitivity(&self, tag: ContextTag) -> f64 {
        self.sensitivities.get(&tag).copied().unwrap_or(0.0)
    }
}

/// Per-turn modifier increments applied when an intervention is detected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionEffect {
    pub intervention: InterventionTag,
    pub deltas: BTreeMap<ConstructId, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaConfig {
    pub persona_id: String,
    #[serde(default)]
    pub description: String,
    pub constructs: Vec<ConstructSpec>,
    #[serde(default)]
    pub intervention_effects: Vec<InterventionEffect>,
    #[serde(default = "default_rounds")]
    pub deliberation_rounds: u8,
    #[serde(default)]
    pub seed: u64,
}

fn default_rounds() -> u8 {
    DEFAULT_ROUNDS
}

impl PersonaConfig {
    pub fn construct(&self, id: &ConstructId) -> Option<&ConstructSpec> {
        self.constructs.iter().find(|c| &c.id == id)
    }

    pub fn construct_mut(&mut self, id: &ConstructId) -> Option<&mut ConstructSpec> {
        self.constructs.iter_mut().find(|c| &c.id == id)
    }

    pub fn construct_ids(&self) -> BTreeSet<ConstructId> {
        self.constructs.iter().map(|c| c.id.clone()).collect()
    }

    pub fn effect(&self, intervention: InterventionTag) -> Option<&InterventionEffect> {
        self.intervention_effects
            .iter()
            .find(|e| e.intervention == intervention)
    }

    /// Constructs sorted by id and effects sorted by intervention: the order
    /// persona files are written in.
    pub fn canonicalized(&self) -> PersonaConfig {
        let mut out = self.clone();
        out.constructs.sort_by(|a, b| a.id.cmp(&b.id));
        out.intervention_effects.sort_by_key(|e| e.intervention);
        out
    }
}

/// One broken invariant, located by a path such as `constructs[2].base_activation`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }

    fn check_range(&mut self, path: String, value: f64, lo: f64, hi: f64) {
        // NaN fails both comparisons.
        if !(value >= lo && value <= hi) {
            self.push(path, format!("{value} is outside [{lo}, {hi}]"));
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PersonaError {
    #[error("persona parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid persona: {0}")]
    Invalid(ValidationReport),
    #[error("persona io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Every invariant violation in `config`. An empty report means valid.
pub fn validate_persona(config: &PersonaConfig) -> ValidationReport {
    let mut report = ValidationReport::default();

    if config.persona_id.trim().is_empty() {
        report.push("persona_id", "must not be empty");
    }
    if config.constructs.is_empty() {
        report.push("constructs", "at least one construct is required");
    }
    if config.constructs.len() > MAX_CONSTRUCTS {
        report.push(
            "constructs",
            format!(
                "{} constructs exceeds the limit of {MAX_CONSTRUCTS}",
                config.constructs.len()
            ),
        );
    }
    if !(2..=3).contains(&config.deliberation_rounds) {
        report.push(
            "deliberation_rounds",
            format!("{} is not 2 or 3", config.deliberation_rounds),
        );
    }

    let mut seen = BTreeSet::new();
    for (i, c) in config.constructs.iter().enumerate() {
        let at = |field: &str| format!("constructs[{i}].{field}");
        if !c.id.is_well_formed() {
            report.push(
                at("id"),
                format!("`{}` does not match [a-z][a-z0-9_]*", c.id),
            );
        } else if !seen.insert(&c.id) {
            report.push(at("id"), format!("duplicate construct id `{}`", c.id));
        }
        report.check_range(at("base_activation"), c.base_activation, 0.0, 1.0);
        report.check_range(at("assertiveness"), c.assertiveness, 0.0, 1.0);
        report.check_range(at("persuadability"), c.persuadability, 0.0, 1.0);
        for (tag, value) in &c.sensitivities {
            report.check_range(at(&format!("sensitivities.{tag}")), *value, -1.0, 1.0);
        }
    }

    let ids = config.construct_ids();
    let mut seen_effects = BTreeSet::new();
    for (i, effect) in config.intervention_effects.iter().enumerate() {
        if !seen_effects.insert(effect.intervention) {
            report.push(
                format!("intervention_effects[{i}].intervention"),
                format!("duplicate effect for `{}`", effect.intervention),
            );
        }
        for (id, delta) in &effect.deltas {
            let path = format!("intervention_effects[{i}].deltas.{id}");
            if !ids.contains(id) {
                report.push(path.clone(), format!("unknown construct `{id}`"));
            }
            report.check_range(path, *delta, -MAX_EFFECT_DELTA, MAX_EFFECT_DELTA);
        }
    }

    report
}

/// Parse and validate a persona file.
pub fn load_persona(source: &[u8]) -> Result<PersonaConfig, PersonaError> {
    let config: PersonaConfig =
        serde_json::from_slice(source).map_err(|e| PersonaError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
    let report = validate_persona(&config);
    if !report.is_valid() {
        return Err(PersonaError::Invalid(report));
    }
    Ok(config)
}

pub fn load_persona_file(path: impl AsRef<Path>) -> Result<PersonaConfig, PersonaError> {
    load_persona(&std::fs::read(path)?)
}

/// Canonical persona bytes: constructs sorted by id, keys sorted, 6 significant digits.
pub fn save_persona(config: &PersonaConfig) -> Result<Vec<u8>, PersonaError> {
    let report = validate_persona(config);
    if !report.is_valid() {
        return Err(PersonaError::Invalid(report));
    }
    let canonical = config.canonicalized();
    Ok(canonical::to_canonical_vec(&canonical).expect("validated persona serializes"))
}

pub mod presets {
    //! Persona files shipped under `personas/`.

    use super::{load_persona, PersonaConfig};

    pub const MATH_ANXIOUS_STUDENT: &str =
        include_str!("../../../personas/math_anxious_student.json");
    pub const ANXIOUS_PATIENT: &str = include_str!("../../../personas/anxious_patient.json");
    pub const IMPATIENT_CUSTOMER: &str = include_str!("../../../personas/impatient_customer.json");

    /// The algebra-anxious, geometry-confident student.
    pub fn math_anxious_student() -> PersonaConfig {
        load_persona(MATH_ANXIOUS_STUDENT.as_bytes()).expect("shipped preset is valid")
    }

    pub fn anxious_patient() -> PersonaConfig {
        load_persona(ANXIOUS_PATIENT.as_bytes()).expect("shipped preset is valid")
    }

    pub fn impatient_customer() -> PersonaConfig {
        load_persona(IMPATIENT_CUSTOMER.as_bytes()).expect("shipped preset is valid")
    }

    pub fn all() -> Vec<PersonaConfig> {
        vec![
            math_anxious_student(),
            anxious_patient(),
            impatient_customer(),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn preset() -> PersonaConfig {
        presets::math_anxious_student()
    }

    #[test]
    fn presets_validate_clean() {
        for p in presets::all() {
            assert_eq!(
                validate_persona(&p),
                ValidationReport::default(),
                "{}",
                p.persona_id
            );
        }
    }

    #[test]
    fn preset_has_six_constructs_and_default_rounds() {
        let p = preset();
        assert_eq!(p.constructs.len(), 6);
        assert_eq!(p.deliberation_rounds, 3);
        let ma = p.construct(&"math_anxiety".into()).unwrap();
        assert_eq!(ma.stance_direction, StanceDirection::Avoid);
        assert_eq!(ma.sensitivity(ContextTag::Algebra), 0.5);
        assert_eq!(ma.sensitivity(ContextTag::Geometry), -0.1);
    }

    #[test]
    fn out_of_range_base_is_one_violation() {
        let mut p = preset();
        p.constructs[1].base_activation = 1.5;
        let report = validate_persona(&p);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].path, "constructs[1].base_activation");
    }

    #[test]
    fn duplicate_id_is_one_violation() {
        let mut p = preset();
        p.constructs[0].id = "self_efficacy".into();
        // keep effect references resolvable
        let report = validate_persona(&p);
        let dup: Vec<_> = report
            .violations
            .iter()
            .filter(|v| v.message.contains("duplicate"))
            .collect();
        assert_eq!(dup.len(), 1, "{report}");
    }

    #[test]
    fn unknown_effect_target_and_bad_rounds() {
        let mut p = preset();
        p.deliberation_rounds = 4;
        p.intervention_effects[0]
            .deltas
            .insert("courage".into(), 0.1);
        let paths: Vec<_> = validate_persona(&p)
            .violations
            .into_iter()
            .map(|v| v.path)
            .collect();
        assert!(paths.contains(&"deliberation_rounds".to_string()));
        assert!(paths.iter().any(|p| p.ends_with("deltas.courage")));
    }

    #[test]
    fn empty_stream_is_parse_error() {
        assert!(matches!(load_persona(b""), Err(PersonaError::Parse { .. })));
    }

    #[test]
    fn missing_rounds_defaults_to_three() {
        let mut v: serde_json::Value = serde_json::from_str(presets::MATH_ANXIOUS_STUDENT).unwrap();
        v.as_object_mut().unwrap().remove("deliberation_rounds");
        let p = load_persona(v.to_string().as_bytes()).unwrap();
        assert_eq!(p.deliberation_rounds, 3);
    }

    #[test]
    fn shipped_file_is_canonical() {
        let p = preset();
        assert_eq!(
            save_persona(&p).unwrap(),
            presets::MATH_ANXIOUS_STUDENT.as_bytes()
        );
        for text in [presets::ANXIOUS_PATIENT, presets::IMPATIENT_CUSTOMER] {
            let p = load_persona(text.as_bytes()).unwrap();
            assert_eq!(String::from_utf8(save_persona(&p).unwrap()).unwrap(), text);
        }
    }

    #[test]
    fn construct_order_does_not_change_bytes() {
        let p = preset();
        let mut q = p.clone();
        q.constructs.reverse();
        q.intervention_effects.reverse();
        assert_eq!(save_persona(&p).unwrap(), save_persona(&q).unwrap());
    }

    #[test]
    fn nan_is_rejected_on_save() {
        let mut p = preset();
        p.constructs[0].base_activation = f64::NAN;
        assert!(matches!(save_persona(&p), Err(PersonaError::Invalid(_))));
    }

    #[test]
    fn construct_id_format() {
        assert!(ConstructId::new("math_anxiety").is_well_formed());
        assert!(ConstructId::new("a1").is_well_formed());
        assert!(!ConstructId::new("").is_well_formed());
        assert!(!ConstructId::new("1abc").is_well_formed());
        assert!(!ConstructId::new("Math").is_well_formed());
        assert!(!ConstructId::new("math-anxiety").is_well_formed());
    }
}
