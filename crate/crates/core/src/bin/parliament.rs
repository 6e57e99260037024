//! `parliament`: headless runs, sweeps, the oracle check and the HTTP service.

use std::collections::{BTreeMap, BTreeSet};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use parliament::construct::{load_persona_file, ConstructId, PersonaConfig};
use parliament::engine::EngineOptions;
use parliament::experiment::{self, Script, SweepSpec};
use parliament::service::{self, AppState, ServiceConfig};
use parliament::session::SessionRuntime;
use parliament::synth::HttpBackend;
use parliament::tags::ContextTag;

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "parliament",
    version,
    about = "Inner-parliament persona simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct EngineFlags {
    /// Activation below which an agent abstains
    #[arg(long, default_value_t = parliament::engine::DEFAULT_ABSTENTION_FLOOR)]
    abstention_floor: f64,
    /// Largest stance gap bridged inside one coalition
    #[arg(long, default_value_t = parliament::engine::DEFAULT_COALITION_GAP)]
    coalition_gap: f64,
    /// Override the persona's deliberation rounds (2 or 3)
    #[arg(long)]
    rounds: Option<u8>,
}

impl From<EngineFlags> for EngineOptions {
    fn from(f: EngineFlags) -> Self {
        EngineOptions {
            abstention_floor: f.abstention_floor,
            coalition_gap: f.coalition_gap,
            rounds: f.rounds,
            ..EngineOptions::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a script of user utterances against a persona
    Run {
        #[arg(long)]
        persona: PathBuf,
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for session.json and summary.txt
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        engine: EngineFlags,
    },
    /// Evaluate a parameter grid and write one CSV row per cell
    Sweep {
        #[arg(long)]
        persona: PathBuf,
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
        #[command(flatten)]
        engine: EngineFlags,
    },
    /// Compare the engine with the straight-line reference computation
    VerifyOracle {
        #[arg(long)]
        persona: PathBuf,
        /// Comma-separated context tags
        #[arg(long, value_delimiter = ',')]
        tags: Vec<ContextTag>,
        /// Construct state modifier, `construct=value`; repeatable
        #[arg(long = "modifier", value_parser = parse_modifier)]
        modifiers: Vec<(ConstructId, f64)>,
        #[command(flatten)]
        engine: EngineFlags,
    },
    /// Serve the HTTP API
    Serve {
        #[arg(long, env = "PARLIAMENT_BIND", default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        #[arg(long, env = "PARLIAMENT_PERSONAS_DIR", default_value = "personas")]
        personas_dir: PathBuf,
        #[arg(long, env = "PARLIAMENT_SESSIONS_DIR", default_value = "sessions")]
        sessions_dir: PathBuf,
        /// Optional text-generation endpoint
        #[arg(long, env = "PARLIAMENT_BACKEND_URL")]
        backend_url: Option<String>,
        #[arg(long, env = "PARLIAMENT_BACKEND_TIMEOUT_MS", default_value_t = 2000)]
        backend_timeout_ms: u64,
        #[command(flatten)]
        engine: EngineFlags,
    },
}

fn parse_modifier(s: &str) -> Result<(ConstructId, f64), String> {
    let (id, value) = s.split_once('=').ok_or("expected construct=value")?;
    let value: f64 = value.parse().map_err(|e| format!("{e}"))?;
    Ok((ConstructId::new(id.trim()), value))
}

fn fail(code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code)
}

fn persona(path: &Path) -> Result<PersonaConfig, ExitCode> {
    load_persona_file(path).map_err(|e| fail(EXIT_VALIDATION, format!("{}: {e}", path.display())))
}

fn options(flags: EngineFlags) -> Result<EngineOptions, ExitCode> {
    let options = EngineOptions::from(flags);
    options.validate().map_err(|e| fail(EXIT_USAGE, e))?;
    Ok(options)
}

fn script(path: &Path) -> Result<Script, ExitCode> {
    Script::load(path).map_err(|e| fail(EXIT_VALIDATION, format!("{}: {e}", path.display())))
}

fn run(command: Command) -> Result<(), ExitCode> {
    match command {
        Command::Run {
            persona: persona_path,
            script: script_path,
            seed,
            out,
            engine,
        } => {
            let persona = persona(&persona_path)?;
            let script = script(&script_path)?;
            let report = experiment::run_scenario(
                &persona,
                &script,
                seed,
                options(engine)?,
                &SessionRuntime::default(),
            )
            .map_err(|e| fail(EXIT_VALIDATION, e))?;
            print!("{}", report.summary);
            if let Some(dir) = out {
                report
                    .write_to(&dir)
                    .map_err(|e| fail(EXIT_VALIDATION, format!("{}: {e}", dir.display())))?;
            }
        }
        Command::Sweep {
            persona: persona_path,
            spec,
            script: script_path,
            out,
            jobs,
            engine,
        } => {
            let persona = persona(&persona_path)?;
            let script = script(&script_path)?;
            let text = std::fs::read_to_string(&spec)
                .map_err(|e| fail(EXIT_VALIDATION, format!("{}: {e}", spec.display())))?;
            let spec = SweepSpec::from_json(&text).map_err(|e| fail(EXIT_VALIDATION, e))?;
            let result = experiment::run_sweep(
                &persona,
                &spec,
                &script,
                options(engine)?,
                &SessionRuntime::default(),
                jobs,
            )
            .map_err(|e| fail(EXIT_VALIDATION, e))?;
            result
                .write_csv_file(&out)
                .map_err(|e| fail(EXIT_VALIDATION, e))?;
            eprintln!("{} rows written to {}", result.rows.len(), out.display());
        }
        Command::VerifyOracle {
            persona: persona_path,
            tags,
            modifiers,
            engine,
        } => {
            let persona = persona(&persona_path)?;
            let tags: BTreeSet<ContextTag> = tags.into_iter().collect();
            let modifiers: BTreeMap<ConstructId, f64> = modifiers.into_iter().collect();
            let report = experiment::verify_oracle(&persona, &tags, &modifiers, &options(engine)?)
                .map_err(|e| fail(EXIT_VALIDATION, e))?;
            println!(
                "{:>5}  {:<20} {:<10} {:>22} {:>22} {:>10}",
                "round", "construct", "quantity", "engine", "oracle", "|diff|"
            );
            for row in &report.rows {
                println!(
                    "{:>5}  {:<20} {:<10} {:>22.15} {:>22.15} {:>10.2e}",
                    row.round_index,
                    row.construct.as_ref().map_or("-", |c| c.as_str()),
                    row.quantity,
                    row.engine,
                    row.oracle,
                    row.abs()
                );
            }
            for m in &report.mismatches {
                println!("mismatch: {m}");
            }
            println!("max deviation: {:e}", report.max_abs_deviation);
            if !report.passed() {
                return Err(fail(EXIT_DIVERGENCE, "engine and oracle disagree"));
            }
        }
        Command::Serve {
            bind,
            personas_dir,
            sessions_dir,
            backend_url,
            backend_timeout_ms,
            engine,
        } => {
            let mut runtime = SessionRuntime::default();
            if let Some(url) = backend_url {
                runtime = runtime.with_backend(Arc::new(HttpBackend::new(
                    url,
                    Duration::from_millis(backend_timeout_ms),
                )));
            }
            let state = AppState::new(
                ServiceConfig {
                    personas_dir,
                    sessions_dir,
                    options: options(engine)?,
                },
                runtime,
            );
            let rt = tokio::runtime::Runtime::new().map_err(|e| fail(EXIT_USAGE, e))?;
            rt.block_on(service::serve(bind, state))
                .map_err(|e| fail(EXIT_USAGE, format!("{bind}: {e}")))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}
