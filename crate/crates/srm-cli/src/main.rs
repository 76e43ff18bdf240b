//! Command-line front end: benchmark generation, evaluation, per-session
//! tracing, latency measurement and the dimension table.
//!
//! Exit codes: 0 success, 1 I/O or input error, 2 calibration or
//! validation failure.

use anyhow::{anyhow, Context, Result};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use srm_core::bench::{generate_benchmark, BenchmarkSet};
use srm_core::eval::{
    compute_metrics, latency_bench, run_benchmark, trajectory_csv, trajectory_export,
};
use srm_core::gate::RoleProfileSet;
use srm_core::semantics::{Lexicon, DIMENSIONS};
use srm_core::session::{SessionManager, SessionOptions};
use srm_core::srm::SrmConfig;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "srm",
    version,
    about = "Session risk memory: temporal authorization over a stateless action gate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the deterministic 80-session benchmark corpus.
    GenBench {
        /// Seed for the generator; the same seed reproduces the same file.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output path for sessions.json.
        #[arg(long)]
        out: PathBuf,
        /// Optional CSV export with one row per (session, turn).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Evaluate a benchmark file and write results, metrics and the
    /// trajectory table.
    Eval {
        /// Path to sessions.json.
        #[arg(long)]
        sessions: PathBuf,
        /// Optional accumulator config (JSON). Falls back to the
        /// SRM_GATE_CONFIG env var, then to the built-in defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for results.json, metrics.json and trajectory.csv.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Print one session's per-turn verdicts as JSON lines.
    Trace {
        #[arg(long)]
        session_id: String,
        #[arg(long)]
        sessions: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Measure the temporal layer's per-turn overhead.
    Latency {
        /// Number of 50-turn benchmark repetitions.
        #[arg(long, default_value_t = 1000)]
        reps: usize,
    },
    /// Print the semantic dimension table in index order.
    Dims,
}

/// Error carrying the process exit code.
struct CliError {
    code: u8,
    source: anyhow::Error,
}

impl CliError {
    fn input(source: anyhow::Error) -> Self {
        CliError { code: 1, source }
    }

    fn calibration(source: anyhow::Error) -> Self {
        CliError { code: 2, source }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(source: anyhow::Error) -> Self {
        CliError::input(source)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {:#}", err.source);
            ExitCode::from(err.code)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenBench { seed, out, csv } => cmd_gen_bench(seed, &out, csv.as_deref()),
        Command::Eval {
            sessions,
            config,
            out_dir,
        } => cmd_eval(&sessions, config.as_deref(), &out_dir),
        Command::Trace {
            session_id,
            sessions,
            config,
        } => cmd_trace(&session_id, &sessions, config.as_deref()),
        Command::Latency { reps } => cmd_latency(reps),
        Command::Dims => {
            for (i, name) in DIMENSIONS.iter().enumerate() {
                println!("{i:2}  {name}");
            }
            Ok(())
        }
    }
}

fn cmd_gen_bench(seed: u64, out: &Path, csv: Option<&Path>) -> Result<(), CliError> {
    let set = match generate_benchmark(seed) {
        Ok(set) => set,
        Err(failure) => {
            for violation in &failure.0 {
                eprintln!("violation: {violation}");
            }
            return Err(CliError::calibration(anyhow!(
                "generated set violates {} calibration constraint(s)",
                failure.0.len()
            )));
        }
    };
    std::fs::write(out, set.to_json_string())
        .with_context(|| format!("writing {}", out.display()))?;
    if let Some(csv_path) = csv {
        std::fs::write(csv_path, set.to_csv())
            .with_context(|| format!("writing {}", csv_path.display()))?;
    }
    println!(
        "wrote {} sessions (seed {seed}) to {}",
        set.sessions.len(),
        out.display()
    );
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<SrmConfig> {
    let from_env = std::env::var_os("SRM_GATE_CONFIG").map(PathBuf::from);
    let path = match (path, from_env) {
        (Some(p), _) => Some(p.to_path_buf()),
        (None, Some(p)) => Some(p),
        (None, None) => None,
    };
    match path {
        Some(p) => {
            let text = std::fs::read_to_string(&p)
                .with_context(|| format!("reading config {}", p.display()))?;
            SrmConfig::from_json_str(&text)
                .with_context(|| format!("parsing config {}", p.display()))
        }
        None => Ok(SrmConfig::default()),
    }
}

fn load_sessions(path: &Path) -> Result<BenchmarkSet> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading sessions file {}", path.display()))?;
    BenchmarkSet::from_json_str(&text)
        .with_context(|| format!("parsing sessions file {}", path.display()))
}

fn cmd_eval(sessions: &Path, config: Option<&Path>, out_dir: &Path) -> Result<(), CliError> {
    let set = load_sessions(sessions)?;
    let config = load_config(config)?;
    let results = run_benchmark(&set, &config, RoleProfileSet::bundled(), Lexicon::bundled())
        .map_err(|e| match e {
            srm_core::eval::EvalError::CalibrationMismatch { .. } => {
                CliError::calibration(anyhow!(e))
            }
            other => CliError::input(anyhow!(other)),
        })?;
    let metrics = compute_metrics(&results);
    let trajectory = trajectory_export(&results, config.tau);

    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let write_json = |name: &str, value: String| -> Result<()> {
        let path = out_dir.join(name);
        std::fs::write(&path, value).with_context(|| format!("writing {}", path.display()))
    };
    write_json(
        "results.json",
        format!(
            "{}\n",
            serde_json::to_string_pretty(&results).expect("results serialize")
        ),
    )?;
    write_json(
        "metrics.json",
        format!(
            "{}\n",
            serde_json::to_string_pretty(&metrics).expect("metrics serialize")
        ),
    )?;
    write_json("trajectory.csv", trajectory_csv(&trajectory))?;

    println!(
        "evaluated {} sessions: stateless recall={:.4} fpr={:.4}; srm recall={:.4} fpr={:.4}",
        results.len(),
        metrics.stateless.detection_rate,
        metrics.stateless.fpr,
        metrics.srm.detection_rate,
        metrics.srm.fpr
    );
    Ok(())
}

fn cmd_trace(session_id: &str, sessions: &Path, config: Option<&Path>) -> Result<(), CliError> {
    let set = load_sessions(sessions)?;
    let config = load_config(config)?;
    let session = set
        .sessions
        .iter()
        .find(|s| s.id == session_id)
        .ok_or_else(|| {
            anyhow!(
                "no session with id {session_id:?} in {}",
                sessions.display()
            )
        })?;

    let manager = SessionManager::new(
        Lexicon::bundled().clone(),
        RoleProfileSet::bundled().clone(),
        config,
    )
    .with_options(SessionOptions {
        record_history: true,
        halt_on_block: false,
    });
    manager
        .open_session(&session.id, &session.role)
        .map_err(|e| CliError::input(anyhow!(e)))?;
    for turn in &session.turns {
        let verdict = manager
            .evaluate_turn(&session.id, turn)
            .map_err(|e| CliError::input(anyhow!(e)))?;
        println!(
            "{}",
            serde_json::to_string(&verdict).expect("verdict serializes")
        );
    }
    Ok(())
}

fn cmd_latency(reps: usize) -> Result<(), CliError> {
    if reps == 0 {
        return Err(CliError::input(anyhow!("--reps must be at least 1")));
    }
    let summary = latency_bench(reps);
    println!(
        "{}",
        serde_json::to_string_pretty(&summary).expect("latency summary serializes")
    );
    Ok(())
}
