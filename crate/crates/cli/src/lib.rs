//! Command-line harness: config loading, seeded runs, artifacts and manifests.

mod artifacts;
mod commands;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use evcharge::Error;

pub use artifacts::{Manifest, OUT_DIR_ENV, SCHEMA_VERSION};
pub use commands::verify::run_verify_with;

pub const EXIT_OK: i32 = 0;
pub const EXIT_PROPERTY: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "evcharge", version, about = "Multi-agent DDPG workbench for EV charging control")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train agents and write checkpoints, metrics and a manifest.
    Train(TrainArgs),
    /// Roll out trained checkpoints without exploration noise.
    Eval(EvalArgs),
    /// Solve the centralized full-information schedule.
    Baseline(BaselineArgs),
    /// Run a randomized property suite.
    Verify(VerifyArgs),
    /// Compare evaluation runs of the two algorithms.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct OutDir {
    /// Output directory (falls back to $EVCHARGE_OUT_DIR).
    #[arg(long = "out-dir")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// TOML config; omitted keys take their defaults.
    pub config: PathBuf,
    #[arg(long, value_parser = ["iddpg", "ctde"])]
    pub algo: String,
    #[arg(long)]
    pub episodes: usize,
    /// Master seed; repeat for a seed sweep.
    #[arg(long = "seed", default_value = "0")]
    pub seeds: Vec<u64>,
    /// Run the seeds of a sweep concurrently.
    #[arg(long)]
    pub parallel_seeds: bool,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory holding agent checkpoints.
    pub checkpoints: PathBuf,
    pub config: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    pub config: PathBuf,
    /// Seed of the scenario (arrivals, departures, initial levels).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Objective tolerance across restarts.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Also run the grid oracle with this many power levels.
    #[arg(long)]
    pub grid_points: Option<usize>,
    #[command(flatten)]
    pub out: OutDir,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_parser = ["gradcheck", "theorem1", "theorem2", "env-invariants"])]
    pub suite: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    /// Re-run a single instance by the seed printed in a failure table.
    #[arg(long)]
    pub instance_seed: Option<u64>,
    /// Also write the report as JSON here.
    #[arg(long = "out-dir")]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Evaluation output directories.
    #[arg(required = true, num_args = 2..)]
    pub runs: Vec<PathBuf>,
    #[command(flatten)]
    pub out: OutDir,
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => EXIT_IO,
        Error::Infeasible(_) => EXIT_INFEASIBLE,
        _ => EXIT_USAGE,
    }
}

/// Parses `argv` and runs the command, returning the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    let result = match cli.command {
        Command::Train(a) => commands::train::run(a, &argv, out),
        Command::Eval(a) => commands::eval::run(a, &argv, out),
        Command::Baseline(a) => commands::baseline::run(a, &argv, out),
        Command::Verify(a) => commands::verify::run(a, out),
        Command::Compare(a) => commands::compare::run(a, &argv, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
