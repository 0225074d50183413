//! Command implementations. Each returns the text it would write plus any
//! diagnostics, leaving I/O to the caller.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ar1risk_core::ruin::{adjustment_coefficient_closed, fit_log_slope, SLOPE_FIT_WINDOW};
use ar1risk_core::{
    bound_vs_mc_report, lundberg_bound, moment_set, replication_study, ruin_curve, sample_claims_path,
    third_moment_s_paper, Estimator, RuinEstimate, SamplingMode, SimConfig, SolverOptions,
};
use serde::Serialize;

use crate::config::{resolve, ConfigFile, Overrides, RunConfig};
use crate::error::{CliError, CliResult};
use crate::{Cli, Command, ModelArgs, PathArgs, RuinArgs};

pub const DEFAULT_TABLE_REPS: u64 = 500;
pub const DEFAULT_TABLE_N: [u32; 3] = [5, 20, 50];
pub const DEFAULT_RUIN_REPS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Destination {
    Stdout,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub destination: Destination,
    pub contents: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Execution {
    pub artifacts: Vec<Artifact>,
    pub diagnostics: Vec<String>,
}

impl Execution {
    fn emit(&mut self, destination: Destination, contents: String) {
        self.artifacts.push(Artifact {
            destination,
            contents,
        });
    }
}

/// Shortest round-trip decimal form of a float.
fn num(x: f64) -> String {
    format!("{x:?}")
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("summary types serialize");
    s.push('\n');
    s
}

fn primary(cfg: &RunConfig) -> Destination {
    cfg.out.clone().map_or(Destination::Stdout, Destination::File)
}

/// Explicit path, else the primary output path with a new extension.
fn secondary(explicit: &Option<PathBuf>, out: &Option<PathBuf>, ext: &str) -> Option<PathBuf> {
    explicit.clone().or_else(|| {
        out.as_ref().map(|p| {
            let derived = p.with_extension(ext);
            if derived == *p {
                p.with_extension(format!("summary.{ext}"))
            } else {
                derived
            }
        })
    })
}

fn overrides(cli: &Cli, model: &ModelArgs) -> Overrides {
    Overrides {
        alpha: model.alpha,
        mu: model.mu,
        sigma2: model.sigma2,
        theta: model.theta,
        seed: cli.common.seed,
        out: cli.common.out.clone(),
        ..Default::default()
    }
}

fn with_path(mut o: Overrides, path: &PathArgs) -> Overrides {
    o.horizon = path.horizon;
    o.init_mode = path.init;
    o
}

fn with_ruin(mut o: Overrides, ruin: &RuinArgs) -> Overrides {
    o.c = ruin.c;
    o.u_grid = ruin.u_grid.clone();
    o
}

fn load(cli: &Cli, flags: Overrides) -> CliResult<RunConfig> {
    let file = match &cli.common.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    resolve(file, flags)
}

pub fn execute(cli: &Cli) -> CliResult<Execution> {
    match &cli.command {
        Command::Simulate {
            model,
            path,
            sampling,
        } => {
            let mut flags = with_path(overrides(cli, model), path);
            flags.sampling_mode = *sampling;
            cmd_simulate(&load(cli, flags)?)
        }
        Command::Moments {
            model,
            horizon,
            paper_m3,
        } => {
            let mut flags = overrides(cli, model);
            flags.horizon = *horizon;
            cmd_moments(&load(cli, flags)?, *paper_m3)
        }
        Command::Estimate {
            model,
            data,
            use_autocov,
            multistart,
        } => {
            let estimator = if *use_autocov {
                Estimator::Autocov
            } else {
                Estimator::Moments
            };
            cmd_estimate(&load(cli, overrides(cli, model))?, data, estimator, *multistart)
        }
        Command::Table1 {
            model,
            reps,
            n_list,
            csv,
            use_autocov,
        } => {
            let mut flags = overrides(cli, model);
            flags.reps = *reps;
            flags.n_list = n_list.clone();
            let estimator = if *use_autocov {
                Estimator::Autocov
            } else {
                Estimator::Moments
            };
            cmd_table1(&load(cli, flags)?, csv, estimator)
        }
        Command::Bound {
            model,
            ruin,
            truncation,
            mc,
            path,
            reps,
        } => {
            let mut flags = with_ruin(with_path(overrides(cli, model), path), ruin);
            flags.truncation = *truncation;
            flags.reps = *reps;
            cmd_bound(&load(cli, flags)?, &ruin.summary, *mc)
        }
        Command::RuinMc {
            model,
            ruin,
            path,
            reps,
        } => {
            let mut flags = with_ruin(with_path(overrides(cli, model), path), ruin);
            flags.reps = *reps;
            cmd_ruin_mc(&load(cli, flags)?, &ruin.summary)
        }
    }
}

pub fn cmd_simulate(cfg: &RunConfig) -> CliResult<Execution> {
    let sim = SimConfig::new(cfg.params, cfg.horizon, cfg.seed)
        .with_init(cfg.init_mode)
        .with_sampling(cfg.sampling_mode);
    sim.validate()?;
    let path = sample_claims_path(&sim, &mut sim.rng())?;
    let mut csv = String::from("t,y,lambda,n_claims,s_total\n");
    let _ = writeln!(csv, "0,{},{},0,{}", num(path.y0), num(path.y0.exp()), num(0.0));
    for r in &path.records {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            r.t,
            num(r.y),
            num(r.lambda),
            r.n_claims,
            num(r.s_total)
        );
    }
    let mut ex = Execution::default();
    ex.emit(primary(cfg), csv);
    Ok(ex)
}

pub fn cmd_moments(cfg: &RunConfig, paper_m3: bool) -> CliResult<Execution> {
    let mut csv = String::from(if paper_m3 {
        "t,m1,m2,m3,m3_paper\n"
    } else {
        "t,m1,m2,m3\n"
    });
    for t in 0..=cfg.horizon {
        let m = moment_set(&cfg.params, t)?;
        let _ = write!(csv, "{},{},{},{}", t, num(m.m1), num(m.m2), num(m.m3));
        if paper_m3 {
            let _ = write!(csv, ",{}", num(third_moment_s_paper(&cfg.params, t)?));
        }
        csv.push('\n');
    }
    let mut ex = Execution::default();
    ex.emit(primary(cfg), csv);
    Ok(ex)
}

/// Reads the `s_total` column of a claims CSV, in file order.
pub fn read_claims_series(path: &Path) -> CliResult<Vec<f64>> {
    let data_err = |line: u64, message: String| CliError::Data {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => CliError::Io {
                path: path.to_path_buf(),
                source,
            },
            other => data_err(1, format!("{other:?}")),
        })?;
    let headers = reader.headers().map_err(|e| data_err(1, e.to_string()))?.clone();
    let col = headers
        .iter()
        .position(|h| h == "s_total")
        .ok_or_else(|| data_err(1, "no s_total column in header".into()))?;
    let mut series = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            data_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = record
            .get(col)
            .ok_or_else(|| data_err(line, "missing s_total field".into()))?;
        let value: f64 = field
            .parse()
            .map_err(|_| data_err(line, format!("s_total value '{field}' is not a number")))?;
        if !value.is_finite() {
            return Err(data_err(line, format!("s_total value '{field}' is not finite")));
        }
        series.push(value);
    }
    if series.is_empty() {
        return Err(data_err(1, "no data rows".into()));
    }
    Ok(series)
}

pub fn cmd_estimate(
    cfg: &RunConfig,
    data: &Path,
    estimator: Estimator,
    multistart: bool,
) -> CliResult<Execution> {
    let series = read_claims_series(data)?;
    let opts = SolverOptions {
        multistart,
        ..SolverOptions::default()
    };
    let result = estimator.estimate(&series, cfg.params.theta, &opts)?;
    let mut ex = Execution::default();
    if !result.converged {
        ex.diagnostics.push(format!(
            "warning: solver stopped after {} iterations without meeting its tolerance (residual {:e})",
            result.iterations, result.residual_norm
        ));
    }
    if result.identifiability_note {
        ex.diagnostics.push(
            "note: the three raw moments fix only mu' and s2; alpha_hat is one point on that manifold".into(),
        );
    }
    ex.emit(primary(cfg), json(&result));
    Ok(ex)
}

pub fn cmd_table1(cfg: &RunConfig, csv: &Option<PathBuf>, estimator: Estimator) -> CliResult<Execution> {
    let reps = cfg.reps.unwrap_or(DEFAULT_TABLE_REPS);
    let n_list = cfg.n_list.clone().unwrap_or_else(|| DEFAULT_TABLE_N.to_vec());
    let report = replication_study(
        &cfg.params,
        &n_list,
        reps,
        cfg.seed,
        estimator,
        &SolverOptions::default(),
    )?;
    let mut ex = Execution::default();
    for (n, count) in &report.excluded {
        if *count > 0 {
            ex.diagnostics.push(format!(
                "n = {n}: {count} of {reps} replications excluded (no convergence)"
            ));
        }
    }
    ex.emit(primary(cfg), report.to_markdown());
    if let Some(path) = secondary(csv, &cfg.out, "csv") {
        ex.emit(Destination::File(path), report.to_csv());
    }
    Ok(ex)
}

#[derive(Debug, Serialize)]
struct McSummary {
    horizon: u32,
    reps: u64,
    fitted_slope: Option<f64>,
    fit_points: usize,
    fit_window: (f64, f64),
    notice: Option<String>,
}

#[derive(Debug, Serialize)]
struct BoundSummary {
    #[serde(rename = "R")]
    r: f64,
    minus_r: f64,
    c: f64,
    theta: f64,
    z: f64,
    truncation: u32,
    #[serde(rename = "C_N")]
    c_n: Vec<f64>,
    last_term_ratio: f64,
    divergence_flag: bool,
    divergence_warning: bool,
    net_profit_warning: bool,
    min_premium: f64,
    u_grid: String,
    seed: u64,
    fitted_slope: Option<f64>,
    monte_carlo: Option<McSummary>,
}

fn ruin_reps(cfg: &RunConfig) -> u64 {
    cfg.reps.unwrap_or(DEFAULT_RUIN_REPS)
}

pub fn cmd_bound(cfg: &RunConfig, summary: &Option<PathBuf>, mc: bool) -> CliResult<Execution> {
    let c = cfg.premium()?;
    let grid = &cfg.u_grid.values;
    let report = if mc {
        bound_vs_mc_report(
            &cfg.params,
            c,
            grid,
            cfg.horizon,
            ruin_reps(cfg),
            cfg.truncation,
            cfg.seed,
            cfg.init_mode,
        )?
    } else {
        lundberg_bound(&cfg.params, c, grid, cfg.truncation)?
    };
    let mut ex = Execution::default();
    if report.divergence_warning {
        ex.diagnostics.push(format!(
            "warning: the bound constant E[exp(z Lambda)] at z = {} diverges; reporting the truncated sum C_{} = {:e}",
            report.z,
            cfg.truncation,
            report.constant()
        ));
    }
    if report.net_profit_warning {
        ex.diagnostics.push(format!(
            "warning: c = {c} is below the net-profit minimum {} (theta times the mean intensity)",
            report.min_premium
        ));
    }
    let mut csv = String::from("u,bound,psi_hat,ci_low,ci_high\n");
    let estimates = report.mc_comparison.as_ref().map(|m| &m.estimates);
    for (i, (u, b)) in report.u_grid.iter().zip(&report.bound_values).enumerate() {
        match estimates.map(|e| &e[i]) {
            Some(e) => {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    num(*u),
                    num(*b),
                    num(e.psi_hat),
                    num(e.ci_low),
                    num(e.ci_high)
                );
            }
            None => {
                let _ = writeln!(csv, "{},{},,,", num(*u), num(*b));
            }
        }
    }
    let monte_carlo = report.mc_comparison.as_ref().map(|m| {
        if let Some(notice) = &m.notice {
            ex.diagnostics.push(format!("note: {notice}"));
        }
        McSummary {
            horizon: m.horizon,
            reps: m.reps,
            fitted_slope: m.fitted_slope,
            fit_points: m.fit_points,
            fit_window: m.fit_window,
            notice: m.notice.clone(),
        }
    });
    let r = report.adjustment.r_value;
    let s = BoundSummary {
        r,
        minus_r: -r,
        c,
        theta: cfg.params.theta,
        z: report.z,
        truncation: cfg.truncation,
        c_n: report.series.partial_sums.clone(),
        last_term_ratio: report.series.last_term_ratio,
        divergence_flag: report.series.divergence_flag,
        divergence_warning: report.divergence_warning,
        net_profit_warning: report.net_profit_warning,
        min_premium: report.min_premium,
        u_grid: cfg.u_grid.spec.clone(),
        seed: cfg.seed,
        fitted_slope: monte_carlo.as_ref().and_then(|m| m.fitted_slope),
        monte_carlo,
    };
    ex.emit(primary(cfg), csv);
    if let Some(path) = secondary(summary, &cfg.out, "json") {
        ex.emit(Destination::File(path), json(&s));
    }
    Ok(ex)
}

#[derive(Debug, Serialize)]
struct RuinSummary {
    c: f64,
    theta: f64,
    horizon: u32,
    reps: u64,
    seed: u64,
    u_grid: String,
    /// Absent when `c <= theta` (no positive adjustment coefficient).
    #[serde(rename = "R")]
    r: Option<f64>,
    fitted_slope: Option<f64>,
    fit_points: usize,
    fit_window: (f64, f64),
}

pub fn cmd_ruin_mc(cfg: &RunConfig, summary: &Option<PathBuf>) -> CliResult<Execution> {
    let c = cfg.premium()?;
    let sim = SimConfig::new(cfg.params, cfg.horizon, cfg.seed)
        .with_init(cfg.init_mode)
        .with_sampling(SamplingMode::Cumulative);
    let reps = ruin_reps(cfg);
    let estimates: Vec<RuinEstimate> = ruin_curve(&sim, &cfg.u_grid.values, c, reps)?;
    let (fitted_slope, fit_points) = fit_log_slope(&estimates, SLOPE_FIT_WINDOW);
    let mut ex = Execution::default();
    if fitted_slope.is_none() {
        ex.diagnostics.push(format!(
            "note: slope fit omitted, {fit_points} grid points with psi_hat in ({}, {}), need 3",
            SLOPE_FIT_WINDOW.0, SLOPE_FIT_WINDOW.1
        ));
    }
    let mut csv = String::from("u,psi_hat,ci_low,ci_high\n");
    for e in &estimates {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            num(e.u),
            num(e.psi_hat),
            num(e.ci_low),
            num(e.ci_high)
        );
    }
    let s = RuinSummary {
        c,
        theta: cfg.params.theta,
        horizon: cfg.horizon,
        reps,
        seed: cfg.seed,
        u_grid: cfg.u_grid.spec.clone(),
        r: adjustment_coefficient_closed(c, cfg.params.theta)
            .ok()
            .map(|a| a.r_value),
        fitted_slope,
        fit_points,
        fit_window: SLOPE_FIT_WINDOW,
    };
    ex.emit(primary(cfg), csv);
    if let Some(path) = secondary(summary, &cfg.out, "json") {
        ex.emit(Destination::File(path), json(&s));
    }
    Ok(ex)
}
