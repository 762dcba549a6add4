//! The `doss` command-line tool.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input or usage, 3
//! computation error.

mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::doss::DossError;
use crate::manifest::ManifestError;
use crate::metrics::MetricsError;
use crate::plan_file::PlanFileError;
use crate::registry::RegistryError;
use crate::sampler::SamplerError;
use crate::scaling::ScalingError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Computation(String),
    #[error("usage: {0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Validation(_) | CliError::Usage(_) => 2,
            CliError::Computation(_) => 3,
        }
    }
}

impl From<ManifestError> for CliError {
    fn from(e: ManifestError) -> Self {
        match e {
            ManifestError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<DossError> for CliError {
    fn from(e: DossError) -> Self {
        match e {
            DossError::InvalidParams(_) => CliError::Usage(e.to_string()),
            DossError::UnknownDomain(_) | DossError::InvalidPlan(_) => {
                CliError::Validation(e.to_string())
            }
            DossError::NoWeightableReal
            | DossError::NoWeightableFake
            | DossError::DegeneratePlan => CliError::Computation(e.to_string()),
        }
    }
}

impl From<SamplerError> for CliError {
    fn from(e: SamplerError) -> Self {
        match e {
            SamplerError::Plan(inner) => inner.into(),
            SamplerError::EmptyStream => CliError::Usage(e.to_string()),
            SamplerError::NoMass => CliError::Computation(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::Invalid(_) | MetricsError::DuplicateSet(_) | MetricsError::NoSets => {
                CliError::Validation(e.to_string())
            }
            MetricsError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Computation(e.to_string()),
        }
    }
}

impl From<ScalingError> for CliError {
    fn from(e: ScalingError) -> Self {
        match e {
            ScalingError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            ScalingError::MixedMetrics { .. } | ScalingError::NoResults => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Computation(e.to_string()),
        }
    }
}

impl From<PlanFileError> for CliError {
    fn from(e: PlanFileError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<RegistryError> for CliError {
    fn from(e: RegistryError) -> Self {
        CliError::Usage(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "doss",
    version,
    about = "Domain-balanced dataset composition and evaluation"
)]
pub struct Cli {
    /// TOML file with per-command defaults; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check that a manifest parses and satisfies all record invariants.
    Validate(ValidateArgs),
    /// Merge manifests, canonicalize sources and collapse duplicated real audio.
    Curate(CurateArgs),
    /// Compute a selection or weighting plan over a manifest's domains.
    Plan(PlanArgs),
    /// Draw the samples of a selection plan into a pruned manifest.
    Materialize(MaterializeArgs),
    /// Emit a seeded id stream from a weighting plan.
    Sample(SampleArgs),
    /// Score-file evaluation: EER, ACC and CDE per set and macro-averaged.
    Eval(EvalArgs),
    /// Fit y = a * x^b by least squares in log-log space.
    Fit(FitArgs),
    /// Normalized per-domain probabilities of a plan, as CSV.
    Distribution(DistributionArgs),
    /// Build per-trial selection plans for a diversity-scaling setting.
    Scale(ScaleArgs),
    /// Mean/min/max of trial metrics per scaling setting.
    Aggregate(AggregateArgs),
    /// List registered mixing strategies and domain drawers.
    Strategies,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub manifest: PathBuf,
    /// Also write the JSON report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CurateArgs {
    #[arg(required = true)]
    pub manifests: Vec<PathBuf>,
    /// JSON object of "dataset/source": "canonical" entries.
    #[arg(long)]
    pub map: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Strategy name (see `doss strategies`).
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub n_cap: Option<u64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MaterializeArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub plan: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub length: Option<u64>,
    /// Domain drawer (see `doss strategies`).
    #[arg(long)]
    pub drawer: Option<String>,
    /// Newline-delimited id list; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Score files (one test set each) or directories of `*.jsonl` score files.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Macro CDE from macro EER and ACC instead of the mean of per-set CDEs.
    #[arg(long)]
    pub cde_from_macro: bool,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    pub csv: PathBuf,
    #[arg(long, default_value = "x")]
    pub x_col: String,
    #[arg(long, default_value = "y")]
    pub y_col: String,
    /// Keep only rows where COLUMN equals VALUE (numerically when both parse).
    #[arg(long = "where", value_name = "COLUMN=VALUE")]
    pub filter: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DistributionArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub plan: PathBuf,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScaleArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub axis: Option<String>,
    #[arg(long)]
    pub n_units: Option<u32>,
    #[arg(long)]
    pub usage: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub per_source_real: Option<u64>,
    #[arg(long)]
    pub per_generator_fake: Option<u64>,
    #[arg(long)]
    pub trial_seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<u32>,
    /// Allow settings off the experiment grid and non-integral counts.
    #[arg(long)]
    pub no_strict: bool,
    /// Directory receiving one `trial-<i>.json` plan per trial.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    /// CSV with columns axis, n_units, usage, trial, metric, value.
    pub results: PathBuf,
    /// CSV output; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `std::env::args`, runs the command and returns the exit code.
pub fn run() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<i32, CliError> {
    let cfg = config::RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Validate(a) => commands::validate(a),
        Command::Curate(a) => commands::curate(a).map(|_| 0),
        Command::Plan(a) => commands::plan(a, &cfg.plan).map(|_| 0),
        Command::Materialize(a) => commands::materialize(a, &cfg.materialize).map(|_| 0),
        Command::Sample(a) => commands::sample(a, &cfg.sample).map(|_| 0),
        Command::Eval(a) => commands::eval(a, &cfg.eval),
        Command::Fit(a) => commands::fit(a).map(|_| 0),
        Command::Distribution(a) => commands::distribution(a).map(|_| 0),
        Command::Scale(a) => commands::scale(a, &cfg.scale).map(|_| 0),
        Command::Aggregate(a) => commands::aggregate(a).map(|_| 0),
        Command::Strategies => {
            commands::strategies();
            Ok(0)
        }
    }
}
