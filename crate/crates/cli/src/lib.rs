//! Command-line front end: configuration, file formats and subcommands.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 infeasible
//! filtering schedule, 3 comparison below thresholds.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use wigmat::{Complex64, Grid, SamplingMode};

use commands::ComparisonReport;
use config::{parse_complex, parse_grid, Overrides, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0:#}")]
    Config(anyhow::Error),
    #[error("{0}")]
    Infeasible(String),
    #[error("comparison below acceptance thresholds")]
    ComparisonFailed(Box<ComparisonReport>),
    #[error("{0:#}")]
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Runtime(_) => 1,
            CliError::Infeasible(_) => 2,
            CliError::ComparisonFailed(_) => 3,
        }
    }

    pub(crate) fn core(e: wigmat::Error) -> Self {
        match e {
            wigmat::Error::ScheduleInfeasible { .. } | wigmat::Error::RabiNull { .. } => {
                CliError::Infeasible(e.to_string())
            }
            other => CliError::Runtime(other.into()),
        }
    }

    pub(crate) fn classify(e: anyhow::Error) -> Self {
        match e.downcast::<wigmat::Error>() {
            Ok(core) => Self::core(core),
            Err(other) => CliError::Config(other),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "wigmat", version, about = "Wigner-function-matrix tomography of a trapped ion")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact Wigner-matrix field and electronic marginal.
    Exact(RunArgs),
    /// Monte-Carlo emulation of the measurement protocol.
    Sample(RunArgs),
    /// Compare a sampled field with an exact one.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    #[value(name = "fast_analytic")]
    FastAnalytic,
    Trajectory,
    Exact,
}

impl From<ModeArg> for SamplingMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::FastAnalytic => SamplingMode::FastAnalytic,
            ModeArg::Trajectory => SamplingMode::Trajectory,
            ModeArg::Exact => SamplingMode::Exact,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON run configuration; unknown keys are rejected.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed of the random streams.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trials per setting (or per matrix element, see the configuration).
    #[arg(long)]
    pub trials: Option<u64>,
    /// Grid as re_min:re_max:n_re,im_min:im_max:n_im.
    #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
    pub grid: Option<Grid>,
    /// Cat amplitude as re or re,im.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    pub beta: Option<Complex64>,
    /// Lamb-Dicke parameter.
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Number of filtered Fock states M.
    #[arg(long)]
    pub fock_count: Option<usize>,
    /// Fixed cycle count per sequence.
    #[arg(long)]
    pub cycles: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Field written by `exact`.
    pub exact: PathBuf,
    /// Field written by `sample`.
    pub sampled: PathBuf,
    /// Directory for comparison.json.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p).map_err(CliError::Config)?,
            None => RunConfig::default(),
        };
        cfg.apply(&Overrides {
            seed: self.seed,
            trials: self.trials,
            grid: self.grid,
            beta: self.beta,
            eta: self.eta,
            out_dir: self.out_dir.clone(),
            mode: self.mode.map(Into::into),
            fock_count: self.fock_count,
            cycles: self.cycles,
        });
        cfg.validate().map_err(CliError::Config)?;
        Ok(cfg)
    }
}

fn with_threads<T: Send>(
    threads: Option<usize>,
    f: impl FnOnce() -> Result<T, CliError> + Send,
) -> Result<T, CliError> {
    match threads {
        None => f(),
        Some(0) => Err(CliError::Config(anyhow::anyhow!("--threads must be at least 1"))),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Runtime(e.into()))?
            .install(f),
    }
}

/// Runs a parsed command and returns the lines to print.
pub fn run(cli: &Cli) -> Result<Vec<String>, CliError> {
    match &cli.command {
        Command::Exact(args) => {
            let cfg = args.resolve()?;
            let out = with_threads(args.threads, || commands::cmd_exact(&cfg))?;
            Ok(finish(out))
        }
        Command::Sample(args) => {
            let cfg = args.resolve()?;
            let out = with_threads(args.threads, || commands::cmd_sample(&cfg))?;
            Ok(finish(out))
        }
        Command::Compare(args) => {
            commands::cmd_compare(&args.exact, &args.sampled, args.out_dir.as_deref()).map(|r| r.summary())
        }
    }
}

fn finish(out: commands::RunOutcome) -> Vec<String> {
    let mut lines = out.summary;
    for f in &out.files {
        lines.push(format!("wrote {}", out.out_dir.join(&f.file).display()));
    }
    lines
}
