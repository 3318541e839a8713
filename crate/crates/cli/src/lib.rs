//! Command-line driver: generate data, compute truth tables, run estimator
//! batteries and balance diagnostics, and render a markdown report.

mod estimate;
mod generate;
mod output;
mod report;

use std::path::{Path, PathBuf};

use causal_workbench::battery::BatteryKind;
use causal_workbench::error::EstimError;
use causal_workbench::exec::with_threads;
use causal_workbench::simlearner::{DgpConfig, SimError};
use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub use output::significant;

#[derive(Debug, Parser)]
#[command(name = "cwb", version, about = "Simulation learner and treatment-effect estimator batteries")]
pub struct Cli {
    /// Worker threads; output does not depend on it.
    #[arg(long, global = true, env = "CWB_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset from the simulator.
    Generate(GenerateArgs),
    /// Compute the table of true average potential outcomes.
    Truth(TruthArgs),
    /// Run estimator batteries on a dataset.
    Estimate(EstimateArgs),
    /// Covariate balance and score overlap of the propensity models.
    Balance(BalanceArgs),
    /// Render results, truth and balance files as markdown.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Calibrated,
    NullEffect,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Flat TOML simulator configuration; overrides --preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "calibrated")]
    pub preset: Preset,
    #[arg(long, env = "CWB_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// Sample size [default: the config file's, else 17044].
    #[arg(long)]
    pub n: Option<usize>,
    /// Append every potential outcome and the hidden confounder.
    #[arg(long)]
    pub potentials: bool,
    #[arg(long, required_unless_present = "print_config")]
    pub out: Option<PathBuf>,
    /// Print the resolved configuration as TOML and exit.
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Debug, Args)]
pub struct TruthArgs {
    #[command(flatten)]
    pub sim: SimArgs,
    /// Simulated population size [default: the config file's, else 5000000].
    #[arg(long)]
    pub n: Option<usize>,
    /// Dataset written with --potentials; its sample truth is reported.
    #[arg(long, conflicts_with_all = ["config", "n"])]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Battery {
    A1,
    A2,
    #[value(name = "a3-a1-0")]
    A3Offer0,
    #[value(name = "a3-a1-1")]
    A3Offer1,
}

impl Battery {
    pub fn kind(self) -> BatteryKind {
        match self {
            Battery::A1 => BatteryKind::Offer,
            Battery::A2 => BatteryKind::Uptake,
            Battery::A3Offer0 => BatteryKind::Initiation(false),
            Battery::A3Offer1 => BatteryKind::Initiation(true),
        }
    }
}

#[derive(Debug, Args)]
pub struct EstimationArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Batteries to run, in this order.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "a1,a2,a3-a1-0,a3-a1-1")]
    pub battery: Vec<Battery>,
    #[arg(long, default_value_t = 6)]
    pub strata: usize,
    /// Matches per unit, one matching row each.
    #[arg(long, value_delimiter = ',', default_value = "1,3")]
    pub matches: Vec<usize>,
    /// Clamp weights above this percentile (0-100).
    #[arg(long)]
    pub truncate: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub common: EstimationArgs,
    /// Method keys to keep (crude is always reported).
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Bootstrap replicates; 0 keeps the analytic standard errors.
    #[arg(long, short = 'B', default_value_t = 1000)]
    pub bootstrap: usize,
    /// Bootstrap seed.
    #[arg(long, env = "CWB_SEED", default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BalanceArgs {
    #[command(flatten)]
    pub common: EstimationArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Output of `estimate`.
    #[arg(long)]
    pub results: PathBuf,
    /// Output of `truth`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Output of `balance`.
    #[arg(long)]
    pub balance: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Estim(#[from] EstimError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}: no result rows")]
    EmptyInput(String),
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    }
}

fn require_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::io(path, "no such file"))
    }
}

fn sim_config(args: &SimArgs, n: Option<usize>, default_n: usize) -> Result<DgpConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            DgpConfig::from_toml_str(&text)?
        }
        None => match args.preset {
            Preset::Calibrated => DgpConfig::calibrated(),
            Preset::NullEffect => DgpConfig::null_effect(),
        },
    };
    cfg.n = match (n, &args.config) {
        (Some(n), _) => n,
        (None, Some(_)) => cfg.n,
        (None, None) => default_n,
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one command and returns its summary line (empty when the command
/// has nothing to summarise). Results go to `--out` or standard output.
pub fn run(cli: &Cli) -> Result<String, CliError> {
    // inputs and method names are checked before any computation
    match &cli.command {
        Command::Estimate(a) => {
            require_file(&a.common.data)?;
            if let Some(m) = &a.methods {
                causal_workbench::battery::check_methods(m)?;
            }
        }
        Command::Balance(a) => require_file(&a.common.data)?,
        Command::Truth(TruthArgs { data: Some(d), .. }) => require_file(d)?,
        Command::Report(a) => {
            require_file(&a.results)?;
            for p in a.truth.iter().chain(&a.balance) {
                require_file(p)?;
            }
        }
        _ => {}
    }
    with_threads(cli.threads, || match &cli.command {
        Command::Generate(a) => generate::generate(a),
        Command::Truth(a) => generate::truth(a),
        Command::Estimate(a) => estimate::estimate(a),
        Command::Balance(a) => estimate::balance(a),
        Command::Report(a) => report::report(a),
    })
}
