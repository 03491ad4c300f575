//! `ambloc` command-line front end.
//!
//! Exit codes: 0 ok, 1 internal error, 2 invalid input, 3 infeasible,
//! 4 time limit reached with an incumbent.

mod commands;
mod manifest;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub const EXIT_INTERNAL: u8 = 1;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;
pub const EXIT_TIME_LIMIT: u8 = 4;

#[derive(Debug, Parser, Serialize)]
#[command(name = "ambloc", version, about = "Ambulance location and relocation models")]
pub struct Cli {
    /// Print only the paths of the data artifacts written.
    #[arg(long, short, global = true)]
    pub quiet: bool,
    /// Worker threads for sweeps and scenario batches.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: u16,
    /// Seed for every random choice (generator and heuristic).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Generate a synthetic instance.
    Generate(GenerateArgs),
    /// Build and solve one model.
    Solve(SolveArgs),
    /// Epsilon-constraint sweep over the station budget.
    Sweep(SweepArgs),
    /// Run the S1-S5 scenario ladder.
    Scenario(ScenarioArgs),
    /// Write a model in MPS format.
    ExportMps(ModelArgs),
    /// Read an external solver's solution, audit it and decode the plan.
    ImportSolution(ImportArgs),
    /// Score an existing plan on the multi-period model.
    Report(ReportArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct Output {
    /// Output directory (created if missing).
    #[arg(long, short)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
pub enum Spatial {
    UniformSquare,
    Clustered,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
pub enum Profile {
    Uniform,
    TwoPeakDiurnal,
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    /// Generator configuration JSON; defaults to `generator.json` in the config dir.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory holding default configuration files.
    #[arg(long, env = "AMBLOC_CONFIG_DIR", hide_env_values = true)]
    #[serde(skip)]
    pub config_dir: Option<PathBuf>,
    /// Start from the full-size city dimensions instead of the small default.
    #[arg(long, conflicts_with = "config")]
    pub city_scale: bool,
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub sites: Option<usize>,
    #[arg(long)]
    pub periods: Option<usize>,
    #[arg(long, value_enum)]
    pub spatial: Option<Spatial>,
    #[arg(long, value_enum)]
    pub profile: Option<Profile>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args, Serialize)]
pub struct ModelArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// fleet-ict, lr-mexclp-ict, fleet-static or lr-mexclp-static.
    #[arg(long, default_value = "fleet-ict")]
    pub model: String,
    /// Maximum number of open stations.
    #[arg(long)]
    pub epsilon: Option<u32>,
    /// Sites that must be opened, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub mandatory: Vec<usize>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Method {
    Exact,
    Heuristic,
    /// Write the model as MPS and stop.
    Export,
}

#[derive(Debug, Args, Serialize)]
pub struct SearchArgs {
    /// Wall-clock limit per solve, seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Move evaluations for the heuristic's local search.
    #[arg(long, default_value_t = 200_000)]
    pub budget: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_enum, default_value = "exact")]
    pub method: Method,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Also write the reliability table as reliability.csv.
    #[arg(long)]
    pub dump_reliability: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum SearchMethod {
    Exact,
    Heuristic,
}

impl SearchMethod {
    fn name(self) -> &'static str {
        match self {
            SearchMethod::Exact => "exact",
            SearchMethod::Heuristic => "heuristic",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum KindArg {
    Deterministic,
    Probabilistic,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long, value_enum, default_value = "deterministic")]
    pub kind: KindArg,
    /// Smallest budget; defaults to the fewest stations that can host the fleet.
    #[arg(long)]
    pub eps_min: Option<u32>,
    /// Largest budget; defaults to min(sites, fleet x periods).
    #[arg(long)]
    pub eps_max: Option<u32>,
    /// Explicit budgets, comma separated; overrides the range.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["eps_min", "eps_max"])]
    pub eps: Vec<u32>,
    #[arg(long, value_enum, default_value = "exact")]
    pub method: SearchMethod,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Knee threshold: coverage gain per added station, percentage points.
    #[arg(long, default_value_t = 0.5)]
    pub knee_threshold: f64,
    /// Solve every budget from scratch with the heuristic.
    #[arg(long)]
    pub no_warm_start: bool,
    #[arg(long, value_delimiter = ',')]
    pub mandatory: Vec<usize>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum KindsArg {
    Deterministic,
    Probabilistic,
    Both,
}

#[derive(Debug, Args, Serialize)]
pub struct ScenarioArgs {
    #[arg(long)]
    pub instance: PathBuf,
    /// Plan JSON fixing stations (and vehicles for S1).
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// `all` or a list such as `S1,S3`.
    #[arg(long, default_value = "all")]
    pub which: String,
    #[arg(long, value_enum, default_value = "both")]
    pub kind: KindsArg,
    /// Station budget for S4 and S5; unlimited when absent.
    #[arg(long)]
    pub epsilon: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    pub mandatory: Vec<usize>,
    #[arg(long, value_enum, default_value = "exact")]
    pub method: SearchMethod,
    #[command(flatten)]
    pub search: SearchArgs,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args, Serialize)]
pub struct ImportArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// `name value` lines, one per variable.
    #[arg(long)]
    pub solution: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long, value_enum, default_value = "deterministic")]
    pub kind: KindArg,
    #[command(flatten)]
    pub output: Output,
}

/// A failed run: exit code plus message.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Failure { code: EXIT_INVALID, message: format!("{}: {err}", path.display()) }
    }
}

impl From<ambloc::Error> for Failure {
    fn from(err: ambloc::Error) -> Self {
        let code = if err.is_invalid_input() {
            EXIT_INVALID
        } else if matches!(err, ambloc::Error::Infeasible(_)) {
            EXIT_INFEASIBLE
        } else {
            EXIT_INTERNAL
        };
        Failure { code, message: err.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let default_level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default_level))
        .format_timestamp(None)
        .init();
    match commands::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
