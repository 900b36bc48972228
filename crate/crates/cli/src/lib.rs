//! Command-line front end for `oqw-core`: walk files in, text or JSON reports out.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use oqw::OqwError;
use thiserror::Error;

pub mod commands;
pub mod input;
pub mod report;

pub use report::Report;

/// Structural tolerance when neither `--tol` nor `OQW_TOL` is given.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Residual threshold for identity and cross-checks.
pub const DEFAULT_CHECK_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Parse(String),
    #[error(transparent)]
    Compute(#[from] OqwError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Parse(_) => 2,
            CliError::Compute(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Parse(_) => "parse",
            CliError::Compute(_) => "compute",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "oqw", version, about = "Hitting times and ergodic analysis for open quantum walks")]
pub struct Cli {
    /// Emit one JSON record instead of text.
    #[arg(long, global = true)]
    pub json: bool,

    /// Structural tolerance: normalization, ergodicity, constant-trace tests.
    #[arg(long, global = true, env = "OQW_TOL", default_value_t = DEFAULT_TOL)]
    pub tol: f64,

    /// Threshold for identity residuals and cross-checks.
    #[arg(long, global = true, default_value_t = DEFAULT_CHECK_TOL)]
    pub check_tol: f64,

    /// Worker threads for sampling (0 = all cores).
    #[arg(long, global = true, env = "OQW_THREADS", default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check that the effects leaving every site sum to the identity.
    Validate { file: PathBuf },
    /// Spectrum, spectral gap and membership in the ergodic class.
    Ergodic { file: PathBuf },
    /// Hitting probability and mean hitting time of a target site.
    Hitting(HittingArgs),
    /// Residuals of the fundamental-matrix hitting time identities.
    Mhtf(MhtfArgs),
    /// Target time and its independence of the start site.
    TargetTime(TargetTimeArgs),
    /// Minimal polynomial of the walk matrix and the finite hitting time formula.
    Minpoly(MinpolyArgs),
    /// Mean time to cross an N-site path from site 1 to site N.
    Npath(NpathArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum Method {
    Exact,
    Series,
    Simulate,
}

#[derive(Debug, Args)]
pub struct SamplingArgs {
    /// Number of trajectories.
    #[arg(long, default_value_t = 100_000)]
    pub traj: usize,
    /// Master seed; trajectory `t` uses stream `t` of this seed.
    #[arg(long, default_value_t = 0x5eed)]
    pub seed: u64,
    /// Steps after which a trajectory counts as a timeout.
    #[arg(long, default_value_t = 10_000)]
    pub max_steps: usize,
    /// Sample on the calling thread only.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Args)]
pub struct HittingArgs {
    pub file: PathBuf,
    /// Target site (1-based).
    #[arg(long)]
    pub target: usize,
    /// Start density: `bloch:site,x1,x2,x3` or a density file.
    #[arg(long)]
    pub rho: String,
    #[arg(long, value_enum, default_value_t = Method::Exact, conflicts_with_all = ["exact", "series", "simulate"])]
    pub method: Method,
    #[arg(long)]
    pub exact: bool,
    #[arg(long)]
    pub series: bool,
    #[arg(long)]
    pub simulate: bool,
    #[command(flatten)]
    pub sampling: SamplingArgs,
}

impl HittingArgs {
    pub fn chosen_method(&self) -> Result<Method, CliError> {
        match (self.exact, self.series, self.simulate) {
            (false, false, false) => Ok(self.method),
            (true, false, false) => Ok(Method::Exact),
            (false, true, false) => Ok(Method::Series),
            (false, false, true) => Ok(Method::Simulate),
            _ => Err(CliError::Usage("choose one of --exact, --series, --simulate".into())),
        }
    }
}

#[derive(Debug, Args)]
pub struct MhtfArgs {
    pub file: PathBuf,
    /// Extra probe densities, on top of the Hermitian basis.
    #[arg(long)]
    pub rho: Vec<String>,
    /// Random probe densities to add.
    #[arg(long, default_value_t = 20)]
    pub random: usize,
    #[arg(long, default_value_t = 0x5eed)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct TargetTimeArgs {
    pub file: PathBuf,
    /// Density (default: maximally mixed).
    #[arg(long)]
    pub rho: Option<String>,
    /// Start site (1-based).
    #[arg(long, default_value_t = 1)]
    pub start: usize,
    /// Also evaluate over a Bloch grid with this many points per axis.
    #[arg(long)]
    pub sweep: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MinpolyArgs {
    pub file: PathBuf,
    /// Density for the finite-formula cross-check (default: maximally mixed).
    #[arg(long)]
    pub rho: Option<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq, Eq)]
pub enum NpathModeArg {
    Exact,
    Sampled,
}

#[derive(Debug, Args)]
pub struct NpathArgs {
    /// `hadamard-split`, `classical` or `general:x,y,z,w`.
    #[arg(long, default_value = "hadamard-split")]
    pub coin: String,
    /// Number of sites.
    #[arg(long = "N", visible_alias = "sites")]
    pub sites: usize,
    /// Density at site 1.
    #[arg(long, default_value = "bloch:1,0,0,0")]
    pub rho: String,
    #[arg(long, value_enum, default_value_t = NpathModeArg::Exact)]
    pub mode: NpathModeArg,
    #[command(flatten)]
    pub sampling: SamplingArgs,
}

/// Runs one command and prints its report; returns the process exit code.
pub fn run(cli: &Cli) -> u8 {
    let name = commands::name(&cli.command);
    match commands::execute(cli) {
        Ok(report) => {
            if cli.json {
                println!("{}", report.to_json());
            } else {
                print!("{}", report.to_text());
            }
            if report.passed {
                0
            } else {
                1
            }
        }
        Err(e) => {
            if cli.json {
                println!("{}", report::error_json(name, &e));
            }
            eprintln!("oqw {name}: {e}");
            e.exit_code()
        }
    }
}
