//! Seed-deterministic sampling of intensity paths, claims and surplus paths.
//!
//! Random streams: every replication `i` of a run with master seed `s` draws
//! from its own ChaCha8 generator seeded with
//! `substream_seed(s, i) = mix64(s ^ mix64(i))`, where `mix64` is the SplitMix64
//! finalizer. Replications never share state, so serial and parallel runs
//! produce identical results in identical order.
//!
//! Samplers:
//! - Poisson counts use `rand_distr::Poisson` (multiplication of uniforms below
//!   mean 12, transformed rejection above), exact for means up to [`MAX_POISSON_MEAN`].
//! - Claim sizes use inversion, `-theta ln(1 - U)`.
//!
//! Increment conventions ([`SamplingMode`]):
//! - `Marginal`: at each `t` a fresh `N_t ~ Poisson(Lambda_t + t)` given the
//!   shared intensity path. Reproduces the closed-form marginal moments.
//! - `Cumulative`: `dN_t ~ Poisson(max(Lambda_t + t - Lambda_{t-1} - (t-1), 0))`
//!   accumulated into nondecreasing `N_t`, `S_t`. Used for surplus paths.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RiskError, EXP_GUARD};
use crate::params::{ModelParams, StationaryLaw};

pub type SimRng = ChaCha8Rng;

/// Largest Poisson mean the count sampler accepts.
pub const MAX_POISSON_MEAN: f64 = 1e9;

/// SplitMix64 finalizer: a bijective 64-bit avalanche mix.
pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn substream_seed(master: u64, index: u64) -> u64 {
    mix64(master ^ mix64(index))
}

pub fn substream(master: u64, index: u64) -> SimRng {
    SimRng::seed_from_u64(substream_seed(master, index))
}

/// Runs `f` once per replication index on its own substream, in parallel,
/// returning results in index order.
pub fn replicate<T, F>(seed: u64, reps: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut SimRng) -> T + Sync + Send,
{
    (0..reps)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i);
            f(i, &mut rng)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitMode {
    /// `Y_0` set to the given value.
    Fixed(f64),
    /// `Y_0 = mu / (1 - alpha)`.
    StationaryMean,
    /// `Y_0` drawn from the stationary normal law.
    StationaryDraw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    Marginal,
    Cumulative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: ModelParams,
    pub horizon: u32,
    pub init_mode: InitMode,
    pub sampling_mode: SamplingMode,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(params: ModelParams, horizon: u32, seed: u64) -> Self {
        Self {
            params,
            horizon,
            init_mode: InitMode::StationaryMean,
            sampling_mode: SamplingMode::Marginal,
            seed,
        }
    }

    pub fn with_init(mut self, init_mode: InitMode) -> Self {
        self.init_mode = init_mode;
        self
    }

    pub fn with_sampling(mut self, sampling_mode: SamplingMode) -> Self {
        self.sampling_mode = sampling_mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.horizon < 1 {
            return Err(RiskError::Domain("horizon must be at least 1".into()));
        }
        if let InitMode::Fixed(y0) = self.init_mode {
            if !y0.is_finite() {
                return Err(RiskError::Domain(format!("initial value {y0} must be finite")));
            }
        }
        Ok(())
    }

    /// Generator for single-path runs: substream 0 of the master seed.
    pub fn rng(&self) -> SimRng {
        substream(self.seed, 0)
    }
}

/// One time step of a simulated path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub t: u32,
    pub y: f64,
    pub lambda: f64,
    pub n_claims: u64,
    pub s_total: f64,
    pub u_surplus: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaPoint {
    pub t: u32,
    pub y: f64,
    pub lambda: f64,
}

/// Latent path: the initial state plus `horizon` steps `t = 1..=horizon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaPath {
    pub y0: f64,
    pub points: Vec<LambdaPoint>,
}

impl LambdaPath {
    pub fn lambda0(&self) -> f64 {
        self.y0.exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurplusPath {
    pub records: Vec<PathRecord>,
    /// First `t` with negative surplus.
    pub ruin_time: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuinEstimate {
    pub psi_hat: f64,
    pub reps: u64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub u: f64,
    pub c: f64,
    pub horizon: u32,
}

/// Draws `Y ~ Normal(mean_y, var_y)`.
pub fn draw_stationary_y<R: Rng + ?Sized>(law: &StationaryLaw, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    law.mean_y + law.sd_y() * z
}

fn initial_y<R: Rng + ?Sized>(config: &SimConfig, law: &StationaryLaw, rng: &mut R) -> f64 {
    match config.init_mode {
        InitMode::Fixed(y0) => y0,
        InitMode::StationaryMean => law.mean_y,
        InitMode::StationaryDraw => draw_stationary_y(law, rng),
    }
}

fn check_log_intensity(y: f64) -> Result<f64> {
    if y > EXP_GUARD || y.is_nan() {
        Err(RiskError::Range(y))
    } else {
        Ok(y)
    }
}

/// Samples `Y_1..Y_horizon` with `Y_t = alpha Y_{t-1} + eps_t`.
pub fn sample_lambda_path<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> Result<LambdaPath> {
    config.validate()?;
    let p = &config.params;
    let law = p.stationary_law()?;
    let y0 = check_log_intensity(initial_y(config, &law, rng))?;
    let sigma = p.sigma2.sqrt();
    let mut y = y0;
    let mut points = Vec::with_capacity(config.horizon as usize);
    for t in 1..=config.horizon {
        let eps: f64 = StandardNormal.sample(rng);
        y = check_log_intensity(p.alpha * y + p.mu + sigma * eps)?;
        points.push(LambdaPoint {
            t,
            y,
            lambda: y.exp(),
        });
    }
    Ok(LambdaPath { y0, points })
}

pub fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<u64> {
    if mean.is_nan() || mean > MAX_POISSON_MEAN {
        return Err(RiskError::Range(mean));
    }
    if mean <= 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean).map_err(|e| RiskError::Domain(e.to_string()))?;
    Ok(dist.sample(rng) as u64)
}

pub fn sample_exponential<R: Rng + ?Sized>(theta: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    -theta * (1.0 - u).ln()
}

fn sum_of_claims<R: Rng + ?Sized>(n: u64, theta: f64, rng: &mut R) -> f64 {
    (0..n).map(|_| sample_exponential(theta, rng)).sum()
}

/// `N ~ Poisson(lambda + t)` and the sum of `N` exponential claims of mean `theta`.
pub fn sample_claims_at<R: Rng + ?Sized>(t: u32, lambda: f64, theta: f64, rng: &mut R) -> Result<(u64, f64)> {
    if !(lambda > 0.0) || !(theta > 0.0) {
        return Err(RiskError::Domain(format!(
            "claims need lambda > 0 and theta > 0, got ({lambda}, {theta})"
        )));
    }
    let n = sample_poisson(lambda + f64::from(t), rng)?;
    Ok((n, sum_of_claims(n, theta, rng)))
}

/// A claims path together with the initial log-intensity it started from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimsPath {
    pub y0: f64,
    pub records: Vec<PathRecord>,
}

/// Aggregate claims for `t = 1..=horizon` under the configured sampling mode.
pub fn sample_aggregate_series<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> Result<Vec<PathRecord>> {
    Ok(sample_claims_path(config, rng)?.records)
}

/// Same draws as [`sample_aggregate_series`], also returning `Y_0`.
pub fn sample_claims_path<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> Result<ClaimsPath> {
    let path = sample_lambda_path(config, rng)?;
    let theta = config.params.theta;
    let mut out = Vec::with_capacity(path.points.len());
    match config.sampling_mode {
        SamplingMode::Marginal => {
            for pt in &path.points {
                let (n_claims, s_total) = sample_claims_at(pt.t, pt.lambda, theta, rng)?;
                out.push(PathRecord {
                    t: pt.t,
                    y: pt.y,
                    lambda: pt.lambda,
                    n_claims,
                    s_total,
                    u_surplus: None,
                });
            }
        }
        SamplingMode::Cumulative => {
            let mut prev = path.lambda0();
            let (mut n_claims, mut s_total) = (0u64, 0.0);
            for pt in &path.points {
                let level = pt.lambda + f64::from(pt.t);
                let dn = sample_poisson((level - prev).max(0.0), rng)?;
                n_claims += dn;
                s_total += sum_of_claims(dn, theta, rng);
                prev = level;
                out.push(PathRecord {
                    t: pt.t,
                    y: pt.y,
                    lambda: pt.lambda,
                    n_claims,
                    s_total,
                    u_surplus: None,
                });
            }
        }
    }
    Ok(ClaimsPath {
        y0: path.y0,
        records: out,
    })
}

fn check_surplus_inputs(config: &SimConfig, u: f64, c: f64) -> Result<()> {
    if config.sampling_mode != SamplingMode::Cumulative {
        return Err(RiskError::Domain(
            "surplus paths require cumulative sampling".into(),
        ));
    }
    if !(u >= 0.0 && u.is_finite()) || !(c > 0.0 && c.is_finite()) {
        return Err(RiskError::Domain(format!(
            "surplus needs u >= 0 and c > 0, got u = {u}, c = {c}"
        )));
    }
    Ok(())
}

/// `U(t) = u + c t - S_t` along a cumulative claims path.
pub fn sample_surplus_path<R: Rng + ?Sized>(
    config: &SimConfig,
    u: f64,
    c: f64,
    rng: &mut R,
) -> Result<SurplusPath> {
    check_surplus_inputs(config, u, c)?;
    let mut records = sample_aggregate_series(config, rng)?;
    let mut ruin_time = None;
    for r in records.iter_mut() {
        let surplus = u + c * f64::from(r.t) - r.s_total;
        r.u_surplus = Some(surplus);
        if surplus < 0.0 && ruin_time.is_none() {
            ruin_time = Some(r.t);
        }
    }
    Ok(SurplusPath { records, ruin_time })
}

/// `max_t (S_t - c t)`: the path is ruined for exactly those `u` below this value.
pub fn max_deficit<R: Rng + ?Sized>(config: &SimConfig, c: f64, rng: &mut R) -> Result<f64> {
    let records = sample_aggregate_series(config, rng)?;
    Ok(records
        .iter()
        .map(|r| r.s_total - c * f64::from(r.t))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Finite-horizon ruin probabilities on a grid of initial surpluses, all
/// evaluated on the same set of paths (common random numbers), so the
/// estimates are nonincreasing in `u`.
pub fn ruin_curve(config: &SimConfig, u_grid: &[f64], c: f64, reps: u64) -> Result<Vec<RuinEstimate>> {
    if reps < 100 {
        return Err(RiskError::Domain(format!(
            "ruin estimation needs reps >= 100, got {reps}"
        )));
    }
    for &u in u_grid {
        check_surplus_inputs(config, u, c)?;
    }
    config.validate()?;
    let deficits = replicate(config.seed, reps, |_, rng| max_deficit(config, c, rng))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let n = reps as f64;
    Ok(u_grid
        .iter()
        .map(|&u| {
            let ruined = deficits.iter().filter(|&&d| d > u).count() as f64;
            let psi_hat = ruined / n;
            let half = 1.96 * (psi_hat * (1.0 - psi_hat) / n).sqrt();
            RuinEstimate {
                psi_hat,
                reps,
                ci_low: (psi_hat - half).max(0.0),
                ci_high: (psi_hat + half).min(1.0),
                u,
                c,
                horizon: config.horizon,
            }
        })
        .collect())
}

pub fn estimate_ruin_probability(config: &SimConfig, u: f64, c: f64, reps: u64) -> Result<RuinEstimate> {
    Ok(ruin_curve(config, &[u], c, reps)?[0])
}
