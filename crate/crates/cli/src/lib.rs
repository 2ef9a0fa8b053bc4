//! Batch front end: one JSON config per run, seeded replicas, and
//! deterministic `result.json` / `series.csv` artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use ffg_core::FfgError;

pub mod commands;
pub mod config;

pub use config::RunConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] FfgError),
    #[error("oracle check failed: {0}")]
    OracleFailed(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                FfgError::BudgetExceeded(_) | FfgError::RecursionBudgetExceeded(_) => 3,
                FfgError::InvalidModel(_) | FfgError::InvalidConfig(_) | FfgError::CouplingHypothesis(_) => 2,
                _ => 1,
            },
            CliError::OracleFailed(_) => 4,
            CliError::Io { .. } | CliError::Csv(_) => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Parser)]
#[command(name = "ffg", version, about = "Perfect simulation of Gibbs point processes by clans of ancestors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Commands,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the seed of the config file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the number of replicas.
    #[arg(long)]
    pub replicas: Option<u64>,
    /// Directory receiving the artifacts.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Commands {
    /// Diluteness coefficient and regime, optionally over a fugacity grid.
    Alpha(RunArgs),
    /// Perfect samples in a window.
    Sample(RunArgs),
    /// Birth-and-death trajectories started from the empty configuration.
    Forward(RunArgs),
    /// Histograms of clan sizes and generations.
    ClanStats(RunArgs),
    /// Interaction probability of clans of two strips against their distance.
    Mixing(RunArgs),
    /// Coupled samples of a family of targets under one majorant.
    Couple(RunArgs),
    /// Coupled samples of spatial or angular discretizations.
    Discretize(RunArgs),
    /// Potts samples by the alignment of exterior contours.
    PsSample(RunArgs),
    /// Perfect samples against exact enumeration.
    OracleCheck(RunArgs),
    /// Rewrite the series of a result file as CSV.
    PlotData {
        /// A `result.json` produced by another subcommand.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

impl Commands {
    pub fn name(&self) -> &'static str {
        match self {
            Commands::Alpha(_) => "alpha",
            Commands::Sample(_) => "sample",
            Commands::Forward(_) => "forward",
            Commands::ClanStats(_) => "clan-stats",
            Commands::Mixing(_) => "mixing",
            Commands::Couple(_) => "couple",
            Commands::Discretize(_) => "discretize",
            Commands::PsSample(_) => "ps-sample",
            Commands::OracleCheck(_) => "oracle-check",
            Commands::PlotData { .. } => "plot-data",
        }
    }
}

/// Table whose first column is the sweep variable.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Series {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(columns: &[&str]) -> Self {
        Series { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|x| x.to_string()))?;
        }
        w.flush().map_err(io_err(path))?;
        Ok(())
    }
}

/// Contents of `result.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunResult {
    pub subcommand: String,
    pub seed: u64,
    pub config: RunConfig,
    pub summary: Value,
    pub series: Series,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Value>,
}

/// What a subcommand hands back for writing.
pub struct Outcome {
    pub summary: Value,
    pub series: Series,
    pub samples: Option<Value>,
    pub clans: Option<Value>,
    /// Printed on standard output.
    pub report: String,
    /// Set by `oracle-check` when the statistical test fails.
    pub failure: Option<String>,
}

pub fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable value")
}

fn threads_from_env() -> Result<Option<usize>, CliError> {
    match std::env::var("FFG_THREADS") {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Config(format!("FFG_THREADS must be a positive integer, got {s:?}"))),
        },
        Err(_) => Ok(None),
    }
}

pub fn load_config(args: &RunArgs) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(&args.config).map_err(|e| CliError::Config(format!("{}: {e}", args.config.display())))?;
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(s) = args.seed {
        cfg.seed = Some(s);
    }
    if let Some(n) = args.replicas {
        if n == 0 {
            return Err(CliError::Config("replicas must be at least 1".into()));
        }
        cfg.replicas = n;
    }
    if cfg.seed.is_none() {
        return Err(CliError::Config("a seed is required, in the config or with --seed".into()));
    }
    Ok(cfg)
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(v).expect("serializable value");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// Run one subcommand and write its artifacts; returns the text for standard output.
pub fn run(command: &Commands) -> Result<String, CliError> {
    let (args, runner): (&RunArgs, fn(&RunConfig) -> Result<Outcome, CliError>) = match command {
        Commands::PlotData { input, out } => return plot_data(input, out),
        Commands::Alpha(a) => (a, commands::alpha),
        Commands::Sample(a) => (a, commands::sample),
        Commands::Forward(a) => (a, commands::forward),
        Commands::ClanStats(a) => (a, commands::clan_stats),
        Commands::Mixing(a) => (a, commands::mixing),
        Commands::Couple(a) => (a, commands::couple),
        Commands::Discretize(a) => (a, commands::discretize),
        Commands::PsSample(a) => (a, commands::ps_sample),
        Commands::OracleCheck(a) => (a, commands::oracle_check),
    };
    let cfg = load_config(args)?;
    let threads = threads_from_env()?;
    let outcome = ffg_core::parallel::with_threads(threads, || runner(&cfg))?;
    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let result = RunResult {
        subcommand: command.name().into(),
        seed: cfg.seed.expect("checked on load"),
        config: cfg.clone(),
        summary: outcome.summary,
        series: outcome.series,
        samples: outcome.samples,
    };
    write_json(&args.out.join("result.json"), &result)?;
    result.series.write_csv(&args.out.join("series.csv"))?;
    if let Some(clans) = &outcome.clans {
        write_json(&args.out.join("clan.json"), clans)?;
    }
    match outcome.failure {
        Some(why) => Err(CliError::OracleFailed(why)),
        None => Ok(outcome.report),
    }
}

fn plot_data(input: &Path, out: &Path) -> Result<String, CliError> {
    let text = fs::read_to_string(input).map_err(io_err(input))?;
    let result: RunResult =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", input.display())))?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let path = out.join("series.csv");
    result.series.write_csv(&path)?;
    Ok(format!("{} rows of {} written to {}\n", result.series.rows.len(), result.subcommand, path.display()))
}
