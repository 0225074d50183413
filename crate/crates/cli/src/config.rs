//! Run configuration: a JSON file merged with command-line flags.
//!
//! Flags win over file values, file values win over built-in defaults. The
//! merged [`RunConfig`] is validated in full before any command starts.

use std::path::{Path, PathBuf};

use ar1risk_core::{InitMode, ModelParams, SamplingMode};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

pub const DEFAULT_HORIZON: u32 = 50;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_TRUNCATION: u32 = 10;
pub const DEFAULT_U_GRID: &str = "0:10:0.5";

/// Model parameters as they appear in a config file; missing fields fall
/// back to the reference parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub alpha: Option<f64>,
    pub mu: Option<f64>,
    pub sigma2: Option<f64>,
    pub theta: Option<f64>,
}

/// On-disk config document. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub params: Option<ParamsFile>,
    pub c: Option<f64>,
    pub horizon: Option<u32>,
    pub init_mode: Option<InitMode>,
    pub sampling_mode: Option<SamplingMode>,
    pub seed: Option<u64>,
    pub reps: Option<u64>,
    pub truncation: Option<u32>,
    pub u_grid: Option<String>,
    pub n_list: Option<Vec<u32>>,
    pub out: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| CliError::ConfigFile {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Fully resolved settings shared by all commands.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ModelParams,
    pub c: Option<f64>,
    pub horizon: u32,
    pub init_mode: InitMode,
    pub sampling_mode: SamplingMode,
    pub seed: u64,
    pub reps: Option<u64>,
    pub truncation: u32,
    pub u_grid: UGrid,
    pub n_list: Option<Vec<u32>>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn premium(&self) -> CliResult<f64> {
        self.c
            .ok_or_else(|| CliError::Config("premium rate c is required (--c or \"c\" in the config)".into()))
    }
}

/// Grid of initial surplus values parsed from `start:stop:step`; `start` is
/// included, `stop` is excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct UGrid {
    pub spec: String,
    pub values: Vec<f64>,
}

impl UGrid {
    pub fn parse(spec: &str) -> CliResult<Self> {
        let bad = |why: &str| CliError::Config(format!("u-grid '{spec}': {why} (expected start:stop:step)"));
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("need three fields"));
        }
        let mut nums = [0.0; 3];
        for (slot, part) in nums.iter_mut().zip(&parts) {
            *slot = part
                .trim()
                .parse::<f64>()
                .map_err(|_| bad("fields must be numbers"))?;
        }
        let [start, stop, step] = nums;
        if !(start >= 0.0 && start.is_finite() && stop.is_finite()) {
            return Err(bad("start must be finite and nonnegative"));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(bad("step must be positive"));
        }
        if stop <= start {
            return Err(bad("stop must exceed start"));
        }
        let count = ((stop - start) / step).ceil();
        if count > 1e6 {
            return Err(bad("more than a million grid points"));
        }
        // exclusive stop, tolerant of representation error in the step
        let values = (0..count as u64)
            .map(|i| start + i as f64 * step)
            .filter(|u| *u < stop - step * 1e-9)
            .collect();
        Ok(Self {
            spec: spec.to_string(),
            values,
        })
    }
}

/// Flag values that may override a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub alpha: Option<f64>,
    pub mu: Option<f64>,
    pub sigma2: Option<f64>,
    pub theta: Option<f64>,
    pub c: Option<f64>,
    pub horizon: Option<u32>,
    pub init_mode: Option<InitMode>,
    pub sampling_mode: Option<SamplingMode>,
    pub seed: Option<u64>,
    pub reps: Option<u64>,
    pub truncation: Option<u32>,
    pub u_grid: Option<String>,
    pub n_list: Option<Vec<u32>>,
    pub out: Option<PathBuf>,
}

pub fn resolve(file: ConfigFile, flags: Overrides) -> CliResult<RunConfig> {
    let reference = ModelParams::reference();
    let fp = file.params.unwrap_or_default();
    let params = ModelParams {
        alpha: flags.alpha.or(fp.alpha).unwrap_or(reference.alpha),
        mu: flags.mu.or(fp.mu).unwrap_or(reference.mu),
        sigma2: flags.sigma2.or(fp.sigma2).unwrap_or(reference.sigma2),
        theta: flags.theta.or(fp.theta).unwrap_or(reference.theta),
    };
    params.validate()?;
    let c = flags.c.or(file.c);
    if let Some(c) = c {
        if !(c > 0.0 && c.is_finite()) {
            return Err(CliError::Config(format!("premium rate c = {c} must be positive")));
        }
    }
    let horizon = flags.horizon.or(file.horizon).unwrap_or(DEFAULT_HORIZON);
    let init_mode = flags
        .init_mode
        .or(file.init_mode)
        .unwrap_or(InitMode::StationaryMean);
    if let InitMode::Fixed(y0) = init_mode {
        if !y0.is_finite() {
            return Err(CliError::Config(format!(
                "initial log-intensity {y0} must be finite"
            )));
        }
    }
    let n_list = flags.n_list.or(file.n_list);
    if let Some(list) = &n_list {
        if list.is_empty() || list.contains(&0) {
            return Err(CliError::Config(
                "n list must be nonempty with every n >= 1".into(),
            ));
        }
    }
    let reps = flags.reps.or(file.reps);
    if reps == Some(0) {
        return Err(CliError::Config("reps must be at least 1".into()));
    }
    let grid_spec = flags
        .u_grid
        .or(file.u_grid)
        .unwrap_or_else(|| DEFAULT_U_GRID.to_string());
    Ok(RunConfig {
        params,
        c,
        horizon,
        init_mode,
        sampling_mode: flags
            .sampling_mode
            .or(file.sampling_mode)
            .unwrap_or(SamplingMode::Marginal),
        seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        reps,
        truncation: flags.truncation.or(file.truncation).unwrap_or(DEFAULT_TRUNCATION),
        u_grid: UGrid::parse(&grid_spec)?,
        n_list,
        out: flags.out.or(file.out),
    })
}

/// Parses `stationary-mean`, `stationary-draw`, `fixed:<y0>` or a bare number.
pub fn parse_init_mode(s: &str) -> Result<InitMode, String> {
    match s.trim().replace('_', "-").as_str() {
        "stationary-mean" => Ok(InitMode::StationaryMean),
        "stationary-draw" => Ok(InitMode::StationaryDraw),
        other => {
            let num = other.strip_prefix("fixed:").unwrap_or(other);
            num.parse::<f64>()
                .map(InitMode::Fixed)
                .map_err(|_| format!("unknown init mode '{s}'"))
        }
    }
}

pub fn parse_sampling_mode(s: &str) -> Result<SamplingMode, String> {
    match s.trim() {
        "marginal" => Ok(SamplingMode::Marginal),
        "cumulative" => Ok(SamplingMode::Cumulative),
        _ => Err(format!("unknown sampling mode '{s}' (marginal or cumulative)")),
    }
}
