//! Command-line front end for the `ar1risk` model crate.
//!
//! Every command is a pure function of its config file, flags and seed: the
//! output text is assembled in memory first and only written once the whole
//! computation succeeded. Floats are printed in shortest round-trip form so
//! reruns are byte-identical. Diagnostics go to standard error.

pub mod commands;
pub mod config;
pub mod error;

use std::io::Write;
use std::path::{Path, PathBuf};

use ar1risk_core::{InitMode, SamplingMode};
use clap::{Args, Parser, Subcommand};

pub use commands::{execute, Artifact, Destination, Execution};
pub use config::{resolve, ConfigFile, Overrides, RunConfig, UGrid};
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "ar1risk",
    version,
    about = "Log-AR(1) intensity compound-Poisson risk model"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed for every random draw.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Primary output file (standard output when omitted).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; changes wall time only, never output.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// AR(1) coefficient, |alpha| < 1.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Innovation mean.
    #[arg(long, allow_hyphen_values = true)]
    pub mu: Option<f64>,
    /// Innovation variance.
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Mean claim size.
    #[arg(long)]
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct PathArgs {
    /// Number of time steps.
    #[arg(long)]
    pub horizon: Option<u32>,
    /// Initial log-intensity: stationary-mean, stationary-draw or fixed:<y0>.
    #[arg(long, value_parser = config::parse_init_mode, allow_hyphen_values = true)]
    pub init: Option<InitMode>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct RuinArgs {
    /// Premium rate per unit time.
    #[arg(long)]
    pub c: Option<f64>,
    /// Initial-surplus grid `start:stop:step`; start included, stop excluded.
    #[arg(long)]
    pub u_grid: Option<String>,
    /// JSON summary file (defaults to the --out path with a .json extension).
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one path; CSV `t,y,lambda,n_claims,s_total` (row t=0 is the initial state).
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        path: PathArgs,
        /// marginal or cumulative.
        #[arg(long, value_parser = config::parse_sampling_mode)]
        sampling: Option<SamplingMode>,
    },
    /// Closed-form raw moments of S_t for t = 0..=horizon; CSV `t,m1,m2,m3`.
    Moments {
        #[command(flatten)]
        model: ModelArgs,
        /// Last time index.
        #[arg(long)]
        horizon: Option<u32>,
        /// Add a `m3_paper` column with the printed third-moment formula.
        #[arg(long)]
        paper_m3: bool,
    },
    /// Method-of-moments fit of a claims series; JSON result.
    Estimate {
        #[command(flatten)]
        model: ModelArgs,
        /// CSV with an `s_total` column.
        #[arg(long)]
        data: PathBuf,
        /// Match the lag-1 autocovariance instead of the third moment.
        #[arg(long)]
        use_autocov: bool,
        /// Also start the solver from a 3x3x3 grid.
        #[arg(long)]
        multistart: bool,
    },
    /// Replicated estimation study; markdown table plus CSV.
    Table1 {
        #[command(flatten)]
        model: ModelArgs,
        /// Replications per sample size.
        #[arg(long)]
        reps: Option<u64>,
        /// Comma-separated sample sizes.
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<u32>>,
        /// CSV output (defaults to the --out path with a .csv extension).
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        use_autocov: bool,
    },
    /// Exponential ruin bound on a u-grid; CSV `u,bound,psi_hat,ci_low,ci_high` plus JSON summary.
    Bound {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        ruin: RuinArgs,
        /// Series truncation order N of the bound constant.
        #[arg(long)]
        truncation: Option<u32>,
        /// Add Monte Carlo ruin estimates on the same grid.
        #[arg(long)]
        mc: bool,
        #[command(flatten)]
        path: PathArgs,
        #[arg(long)]
        reps: Option<u64>,
    },
    /// Monte Carlo finite-horizon ruin probabilities; CSV `u,psi_hat,ci_low,ci_high` plus JSON summary.
    RuinMc {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        ruin: RuinArgs,
        #[command(flatten)]
        path: PathArgs,
        #[arg(long)]
        reps: Option<u64>,
    },
}

/// Executes the command and writes its artifacts; diagnostics go to `stderr`.
pub fn run(cli: &Cli, stderr: &mut dyn Write) -> CliResult<()> {
    let execution = match cli.common.threads {
        Some(k) => {
            if k == 0 {
                return Err(CliError::Config("--threads must be at least 1".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new().num_threads(k).build()?;
            pool.install(|| execute(cli))?
        }
        None => execute(cli)?,
    };
    for line in &execution.diagnostics {
        let _ = writeln!(stderr, "{line}");
    }
    for artifact in &execution.artifacts {
        write_artifact(artifact)?;
    }
    Ok(())
}

fn write_artifact(artifact: &Artifact) -> CliResult<()> {
    match &artifact.destination {
        Destination::Stdout => {
            let mut out = std::io::stdout().lock();
            out.write_all(artifact.contents.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| CliError::Io {
                    path: Path::new("<stdout>").to_path_buf(),
                    source,
                })
        }
        Destination::File(path) => std::fs::write(path, &artifact.contents).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        }),
    }
}
