//! Headless scenario runs, parameter sweeps and the oracle check.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use chrono::DateTime;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::construct::{validate_persona, ConstructId, PersonaConfig, ValidationReport};
use crate::engine::{run_deliberation, EngineOptions};
use crate::oracle::{self, OracleReport, ORACLE_MAX_CONSTRUCTS};
use crate::session::{write_atomic, Session, SessionError, SessionRuntime};
use crate::synth::BehaviorCategory;
use crate::tags::ContextTag;

pub const MAX_GRID_CELLS: u64 = 1_000_000;

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("invalid sweep axis `{path}`: {reason}")]
    InvalidAxis { path: String, reason: String },
    #[error("sweep grid has {cells} cells, more than {MAX_GRID_CELLS}")]
    GridTooLarge { cells: u64 },
    #[error("sweep value {value} for `{path}` makes the persona invalid: {report}")]
    InvalidValue {
        path: String,
        value: f64,
        report: ValidationReport,
    },
    #[error("oracle check supports at most {ORACLE_MAX_CONSTRUCTS} constructs, persona has {0}")]
    TooManyConstructs(usize),
    #[error("sweep spec parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// Ordered user utterances for a headless run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Script {
    pub lines: Vec<String>,
}

impl Script {
    pub fn new<I, S>(lines: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Script {
            lines: lines.into_iter().map(Into::into).collect(),
        }
    }

    /// One utterance per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Self {
        Script::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> io::Result<Self> {
        Ok(Script::parse(&std::fs::read_to_string(path)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub session: Session,
    pub summary: String,
}

impl ScenarioReport {
    /// Writes `<dir>/session.json` and `<dir>/summary.txt`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> io::Result<()> {
        let dir = dir.as_ref();
        write_atomic(&dir.join("session.json"), &self.session.to_json())?;
        write_atomic(&dir.join("summary.txt"), self.summary.as_bytes())
    }
}

fn headless_session(
    persona: &PersonaConfig,
    seed: u64,
    options: EngineOptions,
) -> Result<Session, SessionError> {
    // Stamped at the epoch with a derived id so repeated runs write identical files.
    Session::builder(persona.clone())
        .options(options)
        .seed(seed)
        .session_id(format!("{}-{seed}", persona.persona_id))
        .created_at(DateTime::UNIX_EPOCH)
        .build()
}

pub fn summarize(session: &Session) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "persona: {}  seed: {}  turns: {}",
        session.persona().persona_id,
        session.seed,
        session.turns.len()
    );
    let _ = writeln!(
        out,
        "{:>4}  {:<18} {:>9}  {:<20} text",
        "turn", "category", "B", "dominant"
    );
    for t in &session.turns {
        let _ = writeln!(
            out,
            "{:>4}  {:<18} {:>+9.4}  {:<20} {}",
            t.turn_index,
            t.outcome.category.as_str(),
            t.deliberation.consensus_score,
            t.deliberation.dominant_agent.as_str(),
            t.user_text
        );
        let _ = writeln!(out, "      reply: {}", t.outcome.utterance);
    }
    out
}

/// Run `script` against a fresh session. `seed` defaults to the persona's.
pub fn run_scenario(
    persona: &PersonaConfig,
    script: &Script,
    seed: Option<u64>,
    options: EngineOptions,
    runtime: &SessionRuntime,
) -> Result<ScenarioReport, SessionError> {
    let mut session = headless_session(persona, seed.unwrap_or(persona.seed), options)?;
    for line in &script.lines {
        session.run_turn(runtime, line)?;
    }
    let summary = summarize(&session);
    Ok(ScenarioReport { session, summary })
}

/// Which persona field a sweep axis varies.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepField {
    BaseActivation(ConstructId),
    Assertiveness(ConstructId),
    Persuadability(ConstructId),
    Sensitivity(ConstructId, ContextTag),
    DeliberationRounds,
}

impl SweepField {
    /// Dotted paths: `self_efficacy.base`, `math_anxiety.sensitivities.algebra`
    /// (or `sensitivities[algebra]`), `deliberation_rounds`.
    pub fn parse(path: &str, persona: &PersonaConfig) -> Result<Self, ExperimentError> {
        let invalid = |reason: &str| ExperimentError::InvalidAxis {
            path: path.to_string(),
            reason: reason.to_string(),
        };
        if path == "deliberation_rounds" {
            return Ok(SweepField::DeliberationRounds);
        }
        let normalized = path.replace('[', ".").replace(']', "");
        let mut parts = normalized.split('.');
        let construct = ConstructId::new(parts.next().unwrap_or_default());
        if persona.construct(&construct).is_none() {
            return Err(invalid("unknown construct"));
        }
        let field = parts.next().ok_or_else(|| invalid("missing field"))?;
        let tag = parts.next();
        if parts.next().is_some() {
            return Err(invalid("too many path segments"));
        }
        match (field, tag) {
            ("base" | "base_activation", None) => Ok(SweepField::BaseActivation(construct)),
            ("assertiveness", None) => Ok(SweepField::Assertiveness(construct)),
            ("persuadability", None) => Ok(SweepField::Persuadability(construct)),
            ("sensitivities", Some(tag)) => {
                let tag = tag.parse().map_err(|_| invalid("unknown context tag"))?;
                Ok(SweepField::Sensitivity(construct, tag))
            }
            _ => Err(invalid("unsupported field")),
        }
    }

    fn apply(&self, persona: &mut PersonaConfig, value: f64) {
        match self {
            SweepField::DeliberationRounds => {
                persona.deliberation_rounds =
                    if value.fract() == 0.0 && (0.0..=255.0).contains(&value) {
                        value as u8
                    } else {
                        0
                    };
            }
            SweepField::BaseActivation(id) => {
                if let Some(c) = persona.construct_mut(id) {
                    c.base_activation = value;
                }
            }
            SweepField::Assertiveness(id) => {
                if let Some(c) = persona.construct_mut(id) {
                    c.assertiveness = value;
                }
            }
            SweepField::Persuadability(id) => {
                if let Some(c) = persona.construct_mut(id) {
                    c.persuadability = value;
                }
            }
            SweepField::Sensitivity(id, tag) => {
                if let Some(c) = persona.construct_mut(id) {
                    c.sensitivities.insert(*tag, value);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub path: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axes: Vec<SweepAxis>,
}

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn grid_size(&self) -> u64 {
        self.axes
            .iter()
            .map(|a| a.values.len() as u64)
            .fold(1u64, |acc, n| acc.saturating_mul(n))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub values: Vec<f64>,
    pub categories: Vec<BehaviorCategory>,
    pub final_b: Option<f64>,
    pub avoidance_rate: f64,
    pub attempt_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub axes: Vec<String>,
    pub turns: usize,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn header(&self) -> Vec<String> {
        let mut h = self.axes.clone();
        h.extend((1..=self.turns).map(|t| format!("turn_{t}")));
        h.extend(["final_b", "avoidance_rate", "attempt_rate"].map(String::from));
        h
    }

    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<(), ExperimentError> {
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(self.header())?;
        for row in &self.rows {
            let mut record: Vec<String> = row.values.iter().map(|v| v.to_string()).collect();
            record.extend(row.categories.iter().map(|c| c.as_str().to_string()));
            record.push(row.final_b.map_or_else(String::new, |b| b.to_string()));
            record.push(row.avoidance_rate.to_string());
            record.push(row.attempt_rate.to_string());
            csv.write_record(&record)?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<(), ExperimentError> {
        let mut bytes = Vec::new();
        self.write_csv(&mut bytes)?;
        Ok(write_atomic(path.as_ref(), &bytes)?)
    }
}

/// Row-major index → one value per axis (first axis varies slowest).
fn cell_values(axes: &[SweepAxis], mut index: u64) -> Vec<f64> {
    let mut values = vec![0.0; axes.len()];
    for (k, axis) in axes.iter().enumerate().rev() {
        let n = axis.values.len() as u64;
        values[k] = axis.values[(index % n) as usize];
        index /= n;
    }
    values
}

fn rates(categories: &[BehaviorCategory]) -> (f64, f64) {
    if categories.is_empty() {
        return (0.0, 0.0);
    }
    let n = categories.len() as f64;
    let avoid = categories.iter().filter(|c| c.is_avoidance()).count() as f64;
    let attempt = categories.iter().filter(|c| c.is_attempt()).count() as f64;
    (avoid / n, attempt / n)
}

/// Evaluate the Cartesian product of the sweep axes. Rows come back in grid
/// order whatever order the cells finish in.
pub fn run_sweep(
    base: &PersonaConfig,
    spec: &SweepSpec,
    script: &Script,
    options: EngineOptions,
    runtime: &SessionRuntime,
    jobs: Option<usize>,
) -> Result<SweepResult, ExperimentError> {
    let cells = spec.grid_size();
    if cells > MAX_GRID_CELLS {
        return Err(ExperimentError::GridTooLarge { cells });
    }
    let mut fields = Vec::with_capacity(spec.axes.len());
    for axis in &spec.axes {
        if axis.values.is_empty() {
            return Err(ExperimentError::InvalidAxis {
                path: axis.path.clone(),
                reason: "no values".into(),
            });
        }
        let field = SweepField::parse(&axis.path, base)?;
        for &value in &axis.values {
            let mut probe = base.clone();
            field.apply(&mut probe, value);
            let report = validate_persona(&probe);
            if !report.is_valid() {
                return Err(ExperimentError::InvalidValue {
                    path: axis.path.clone(),
                    value,
                    report,
                });
            }
        }
        fields.push(field);
    }

    let evaluate = |index: u64| -> Result<SweepRow, ExperimentError> {
        let values = cell_values(&spec.axes, index);
        let mut persona = base.clone();
        for (field, &v) in fields.iter().zip(&values) {
            field.apply(&mut persona, v);
        }
        let report = run_scenario(&persona, script, None, options, runtime)?;
        let categories: Vec<_> = report
            .session
            .turns
            .iter()
            .map(|t| t.outcome.category)
            .collect();
        let (avoidance_rate, attempt_rate) = rates(&categories);
        Ok(SweepRow {
            values,
            final_b: report
                .session
                .turns
                .last()
                .map(|t| t.deliberation.consensus_score),
            categories,
            avoidance_rate,
            attempt_rate,
        })
    };

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        pool = pool.num_threads(n);
    }
    let rows = pool.build()?.install(|| {
        (0..cells)
            .into_par_iter()
            .map(evaluate)
            .collect::<Result<Vec<_>, _>>()
    })?;

    Ok(SweepResult {
        axes: spec.axes.iter().map(|a| a.path.clone()).collect(),
        turns: script.lines.len(),
        rows,
    })
}

/// Engine vs straight-line reference for one deliberation.
pub fn verify_oracle(
    persona: &PersonaConfig,
    context_tags: &BTreeSet<ContextTag>,
    modifiers: &BTreeMap<ConstructId, f64>,
    options: &EngineOptions,
) -> Result<OracleReport, ExperimentError> {
    if persona.constructs.len() > ORACLE_MAX_CONSTRUCTS {
        return Err(ExperimentError::TooManyConstructs(persona.constructs.len()));
    }
    let engine = run_deliberation(persona, modifiers, context_tags, options);
    let reference = oracle::recompute(persona, modifiers, context_tags, options);
    Ok(oracle::compare(&engine, &reference))
}
