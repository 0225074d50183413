//! Method-of-moments estimation of `(alpha, mu, sigma2)` with `theta` known.
//!
//! The pooled sample moments `a_j = (1/n) sum_t S_t^j` of a series
//! `S_1..S_n` are matched against their exact expectation under marginal
//! sampling, `A_j = (1/n) sum_{t=1}^n E[S_t^j]`.
//!
//! Every `A_j` depends on `(alpha, mu, sigma2)` only through the stationary
//! pair `(mu', s2) = (mu/(1-alpha), sigma2/(1-alpha^2))`, so alpha is not
//! identified by the three moment equations: the residual is constant along
//! `{(alpha, mu'(1-alpha), s2(1-alpha^2))}`. The solver returns whichever
//! point of that curve it reaches from its start and sets
//! `identifiability_note`. [`solve_moments_autocov`] replaces the third
//! equation by the lag-1 autocovariance, which does depend on alpha.
//!
//! The fit is a Levenberg-Marquardt least-squares solve over
//! `eta = (atanh alpha, mu, ln sigma2)` with relative residuals
//! `(a_j - A_j) / a_j`.

use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RiskError};
use crate::moments::{lambdas, moment_coefficients};
use crate::params::{ModelParams, StationaryLaw};
use crate::simulator::{mix64, replicate, sample_aggregate_series, InitMode, SamplingMode, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMoments {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub n: usize,
}

pub fn sample_moments(data: &[f64]) -> Result<SampleMoments> {
    if data.is_empty() {
        return Err(RiskError::EmptyInput);
    }
    if let Some(bad) = data.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
        return Err(RiskError::Domain(format!(
            "aggregate claims must be finite and nonnegative, got {bad}"
        )));
    }
    let n = data.len() as f64;
    let (mut a1, mut a2, mut a3) = (0.0, 0.0, 0.0);
    for &s in data {
        a1 += s;
        a2 += s * s;
        a3 += s * s * s;
    }
    Ok(SampleMoments {
        a1: a1 / n,
        a2: a2 / n,
        a3: a3 / n,
        n: data.len(),
    })
}

/// `(mean t, mean t^2, mean t^3)` over `t = 1..=n`.
fn time_power_means(n: u32) -> [f64; 3] {
    let n = f64::from(n);
    [
        (n + 1.0) / 2.0,
        (n + 1.0) * (2.0 * n + 1.0) / 6.0,
        n * (n + 1.0) * (n + 1.0) / 4.0,
    ]
}

/// `A_j = (1/n) sum_{t=1}^n E[S_t^j]` for `j = 1, 2, 3`.
pub fn theoretical_time_averaged_moments(params: &ModelParams, n: u32) -> Result<[f64; 3]> {
    if n < 1 {
        return Err(RiskError::Domain("sample size must be at least 1".into()));
    }
    crate::moments::raw_moments_from_law(&params.stationary_law()?, params.theta, time_power_means(n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Starting `(alpha, mu, sigma2)`.
    pub init: [f64; 3],
    pub max_iter: usize,
    /// Also start from a 3x3x3 grid and keep the lowest residual.
    pub multistart: bool,
    /// Stop when the infinity norm of the gradient falls below this.
    pub gtol: f64,
    /// Stop when a step is smaller than `xtol * (|eta| + xtol)`.
    pub xtol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            init: [0.5, 0.5, 0.5],
            max_iter: 500,
            multistart: false,
            gtol: 1e-14,
            xtol: 1e-13,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub alpha_hat: f64,
    pub mu_hat: f64,
    pub sigma2_hat: f64,
    pub mu_prime_hat: f64,
    pub s2_hat: f64,
    #[serde(rename = "residual")]
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when alpha is only determined up to the stationary-law manifold.
    pub identifiability_note: bool,
}

const ETA_ALPHA_MAX: f64 = 18.0;
const ETA_LOG_SIGMA2_RANGE: (f64, f64) = (-700.0, 50.0);

#[derive(Debug, Clone, Copy)]
struct Point {
    alpha: f64,
    mu: f64,
    sigma2: f64,
}

impl Point {
    fn from_eta(eta: &Vector3<f64>) -> Self {
        Self {
            alpha: eta[0].clamp(-ETA_ALPHA_MAX, ETA_ALPHA_MAX).tanh(),
            mu: eta[1],
            sigma2: eta[2].clamp(ETA_LOG_SIGMA2_RANGE.0, ETA_LOG_SIGMA2_RANGE.1).exp(),
        }
    }

    fn to_eta(alpha: f64, mu: f64, sigma2: f64) -> Result<Vector3<f64>> {
        if !(alpha > -1.0 && alpha < 1.0) || !(sigma2 > 0.0) || !mu.is_finite() {
            return Err(RiskError::Domain(format!(
                "solver start ({alpha}, {mu}, {sigma2}) outside alpha in (-1,1), sigma2 > 0"
            )));
        }
        Ok(Vector3::new(alpha.atanh(), mu, sigma2.ln()))
    }

    fn law(&self) -> StationaryLaw {
        StationaryLaw {
            mean_y: self.mu / (1.0 - self.alpha),
            var_y: self.sigma2 / (1.0 - self.alpha * self.alpha),
        }
    }

    /// Rows: d(mu', s2, alpha); columns: d eta.
    fn chain(&self) -> Matrix3<f64> {
        let a = self.alpha;
        let one_m = 1.0 - a;
        let one_m2 = 1.0 - a * a;
        Matrix3::new(
            self.mu * (1.0 + a) / one_m,
            1.0 / one_m,
            0.0,
            2.0 * a * self.sigma2 / one_m2,
            0.0,
            self.sigma2 / one_m2,
            one_m2,
            0.0,
            0.0,
        )
    }
}

/// Targets and model for a three-equation fit: residual
/// `r_j = (target_j - model_j) / scale_j` and the model's partials with
/// respect to `(mu', s2, alpha)`.
trait MomentSystem {
    fn targets(&self) -> (Vector3<f64>, Vector3<f64>);
    fn model(&self, p: &Point) -> Result<(Vector3<f64>, Matrix3<f64>)>;
    fn identifies_alpha(&self) -> bool;
}

struct RawMomentSystem {
    a: SampleMoments,
    theta: f64,
}

impl MomentSystem for RawMomentSystem {
    fn targets(&self) -> (Vector3<f64>, Vector3<f64>) {
        let t = Vector3::new(self.a.a1, self.a.a2, self.a.a3);
        (t, t)
    }

    fn model(&self, p: &Point) -> Result<(Vector3<f64>, Matrix3<f64>)> {
        let law = p.law();
        let l = lambdas(&law)?;
        let coef = moment_coefficients(time_power_means(self.a.n as u32));
        let mut value = Vector3::zeros();
        let mut jac = Matrix3::zeros();
        let mut scale = 1.0;
        for (j, row) in coef.iter().enumerate() {
            scale *= self.theta;
            let mut v = row[0];
            let (mut d_mean, mut d_var) = (0.0, 0.0);
            for k in 0..3 {
                let kf = (k + 1) as f64;
                v += row[k + 1] * l[k];
                d_mean += row[k + 1] * kf * l[k];
                d_var += row[k + 1] * 0.5 * kf * kf * l[k];
            }
            value[j] = scale * v;
            jac[(j, 0)] = scale * d_mean;
            jac[(j, 1)] = scale * d_var;
        }
        Ok((value, jac))
    }

    fn identifies_alpha(&self) -> bool {
        false
    }
}

/// Summary statistics for the autocovariance-based fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutocovStats {
    pub a1: f64,
    pub a2: f64,
    /// Lag-1 autocovariance of the detrended series `S_t - theta t`.
    pub gamma1: f64,
    /// Variance of the detrended series, used to scale the covariance residual.
    pub gamma0: f64,
    pub n: usize,
}

impl AutocovStats {
    pub fn from_series(series: &[f64], theta: f64) -> Result<Self> {
        if series.len() < 3 {
            return Err(RiskError::Domain(format!(
                "autocovariance fit needs at least 3 observations, got {}",
                series.len()
            )));
        }
        let m = sample_moments(series)?;
        let d: Vec<f64> = series
            .iter()
            .enumerate()
            .map(|(i, s)| s - theta * (i + 1) as f64)
            .collect();
        let n = d.len() as f64;
        let mean = d.iter().sum::<f64>() / n;
        let gamma0 = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let gamma1 = d.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / (n - 1.0);
        Ok(Self {
            a1: m.a1,
            a2: m.a2,
            gamma1,
            gamma0,
            n: series.len(),
        })
    }

    /// Exact expectations of the statistics' targets at `params` (the fixed point).
    pub fn theoretical(params: &ModelParams, n: u32) -> Result<Self> {
        let [a1, a2, _] = theoretical_time_averaged_moments(params, n)?;
        let law = params.stationary_law()?;
        let [l1, l2, _] = lambdas(&law)?;
        Ok(Self {
            a1,
            a2,
            gamma1: lag1_covariance(&law, params.alpha, params.theta),
            gamma0: params.theta.powi(2) * (l2 - l1 * l1),
            n: n as usize,
        })
    }
}

/// `Cov(S_t, S_{t+1}) = theta^2 (e^{2 mu' + (1+alpha) s2} - e^{2 mu' + s2})` under marginal sampling.
pub fn lag1_covariance(law: &StationaryLaw, alpha: f64, theta: f64) -> f64 {
    let base = 2.0 * law.mean_y;
    theta * theta * ((base + (1.0 + alpha) * law.var_y).exp() - (base + law.var_y).exp())
}

struct AutocovSystem {
    stats: AutocovStats,
    theta: f64,
}

impl MomentSystem for AutocovSystem {
    fn targets(&self) -> (Vector3<f64>, Vector3<f64>) {
        let s = &self.stats;
        let scale = if s.gamma0 > 0.0 { s.gamma0 } else { 1.0 };
        (
            Vector3::new(s.a1, s.a2, s.gamma1),
            Vector3::new(s.a1, s.a2, scale),
        )
    }

    fn model(&self, p: &Point) -> Result<(Vector3<f64>, Matrix3<f64>)> {
        let raw = RawMomentSystem {
            a: SampleMoments {
                a1: self.stats.a1,
                a2: self.stats.a2,
                a3: 0.0,
                n: self.stats.n,
            },
            theta: self.theta,
        };
        let (mut value, mut jac) = raw.model(p)?;
        let law = p.law();
        let th2 = self.theta * self.theta;
        let base = 2.0 * law.mean_y;
        let e1 = (base + (1.0 + p.alpha) * law.var_y).exp();
        let e0 = (base + law.var_y).exp();
        if !(e1.is_finite() && e0.is_finite()) {
            return Err(RiskError::Range(base + (1.0 + p.alpha) * law.var_y));
        }
        value[2] = th2 * (e1 - e0);
        jac[(2, 0)] = th2 * 2.0 * (e1 - e0);
        jac[(2, 1)] = th2 * ((1.0 + p.alpha) * e1 - e0);
        jac[(2, 2)] = th2 * law.var_y * e1;
        Ok((value, jac))
    }

    fn identifies_alpha(&self) -> bool {
        true
    }
}

fn residual_and_jacobian<S: MomentSystem>(
    sys: &S,
    eta: &Vector3<f64>,
) -> Result<(Vector3<f64>, Matrix3<f64>)> {
    let p = Point::from_eta(eta);
    let (target, scale) = sys.targets();
    let (value, d_nat) = sys.model(&p)?;
    let r = (target - value).component_div(&scale);
    if !r.iter().all(|x| x.is_finite()) {
        return Err(RiskError::Range(f64::INFINITY));
    }
    let mut j = d_nat * p.chain();
    for row in 0..3 {
        for col in 0..3 {
            j[(row, col)] = -j[(row, col)] / scale[row];
        }
    }
    Ok((r, j))
}

struct LmOutcome {
    eta: Vector3<f64>,
    residual: Vector3<f64>,
    iterations: usize,
    converged: bool,
}

fn levenberg_marquardt<S: MomentSystem>(
    sys: &S,
    start: Vector3<f64>,
    opts: &SolverOptions,
) -> Result<LmOutcome> {
    let mut eta = start;
    let (mut r, mut j) = residual_and_jacobian(sys, &eta)?;
    let mut cost = 0.5 * r.norm_squared();
    let jtj = j.transpose() * j;
    let mut damping = 1e-3 * jtj.diagonal().max().max(1e-12);
    let mut nu = 2.0;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let g = j.transpose() * r;
        if cost == 0.0 || g.amax() <= opts.gtol {
            return Ok(LmOutcome {
                eta,
                residual: r,
                iterations,
                converged: true,
            });
        }
        iterations += 1;
        let jtj = j.transpose() * j;
        let lhs = jtj + Matrix3::identity() * damping;
        let Some(chol) = lhs.cholesky() else {
            damping *= nu;
            nu *= 2.0;
            continue;
        };
        let step = chol.solve(&(-g));
        let predicted = -(step.dot(&g) + 0.5 * step.dot(&(jtj * step)));
        let candidate = eta + step;
        let accepted = match residual_and_jacobian(sys, &candidate) {
            Ok((r_new, j_new)) => {
                let cost_new = 0.5 * r_new.norm_squared();
                let rho = if predicted > 0.0 {
                    (cost - cost_new) / predicted
                } else {
                    -1.0
                };
                if cost_new < cost || (cost_new == cost && rho >= 0.0 && step.norm() == 0.0) {
                    damping *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
                    nu = 2.0;
                    eta = candidate;
                    r = r_new;
                    j = j_new;
                    cost = cost_new;
                    true
                } else {
                    false
                }
            }
            Err(_) => false,
        };
        if accepted {
            if step.norm() <= opts.xtol * (eta.norm() + opts.xtol) {
                return Ok(LmOutcome {
                    eta,
                    residual: r,
                    iterations,
                    converged: true,
                });
            }
        } else {
            damping *= nu;
            nu *= 2.0;
            if !damping.is_finite() || damping > 1e300 {
                // no descent direction left at machine precision
                return Ok(LmOutcome {
                    eta,
                    residual: r,
                    iterations,
                    converged: g.amax() <= 1e-8,
                });
            }
        }
    }
    Ok(LmOutcome {
        eta,
        residual: r,
        iterations,
        converged: false,
    })
}

fn multistart_grid() -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(27);
    for a in [-0.5, 0.0, 0.5] {
        for m in [-0.5, 0.5, 1.5] {
            for s in [0.1, 0.5, 1.0] {
                out.push([a, m, s]);
            }
        }
    }
    out
}

fn solve_system<S: MomentSystem>(sys: &S, opts: &SolverOptions) -> Result<EstimateResult> {
    let mut starts = vec![opts.init];
    if opts.multistart {
        starts.extend(multistart_grid());
    }
    let mut best: Option<LmOutcome> = None;
    let mut last_err = None;
    for s in starts {
        let eta0 = Point::to_eta(s[0], s[1], s[2])?;
        match levenberg_marquardt(sys, eta0, opts) {
            Ok(out) => {
                let better = match &best {
                    None => true,
                    Some(b) => {
                        (out.converged && !b.converged)
                            || (out.converged == b.converged && out.residual.norm() < b.residual.norm())
                    }
                };
                if better {
                    best = Some(out);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let Some(out) = best else {
        return Err(last_err.unwrap_or(RiskError::NonConvergence {
            iterations: 0,
            last: f64::NAN,
        }));
    };
    let p = Point::from_eta(&out.eta);
    let law = p.law();
    Ok(EstimateResult {
        alpha_hat: p.alpha,
        mu_hat: p.mu,
        sigma2_hat: p.sigma2,
        mu_prime_hat: law.mean_y,
        s2_hat: law.var_y,
        residual_norm: out.residual.norm(),
        iterations: out.iterations,
        converged: out.converged,
        identifiability_note: !sys.identifies_alpha(),
    })
}

/// Weighted residuals `(a_j - A_j) / a_j` at the given parameters.
pub fn moment_residuals(a: &SampleMoments, theta: f64, alpha: f64, mu: f64, sigma2: f64) -> Result<[f64; 3]> {
    let sys = RawMomentSystem { a: *a, theta };
    let (r, _) = residual_and_jacobian(&sys, &Point::to_eta(alpha, mu, sigma2)?)?;
    Ok([r[0], r[1], r[2]])
}

fn check_moment_inputs(a: &SampleMoments, theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(RiskError::Domain(format!("theta = {theta} must be positive")));
    }
    if a.n == 0 {
        return Err(RiskError::EmptyInput);
    }
    if !(a.a1 > 0.0 && a.a2 > 0.0 && a.a3 > 0.0) {
        return Err(RiskError::DegenerateInput(
            "sample moments must be positive for relative residuals".into(),
        ));
    }
    if a.a2 < a.a1 * a.a1 {
        return Err(RiskError::DegenerateInput(format!(
            "a2 = {} is below a1^2 = {}",
            a.a2,
            a.a1 * a.a1
        )));
    }
    Ok(())
}

/// Fits `(alpha, mu, sigma2)` to the sample raw moments with `theta` fixed.
pub fn solve_moments(a: &SampleMoments, theta: f64, opts: &SolverOptions) -> Result<EstimateResult> {
    check_moment_inputs(a, theta)?;
    solve_system(&RawMomentSystem { a: *a, theta }, opts)
}

/// Fits `(a1, a2, lag-1 autocovariance)`, which identifies alpha.
pub fn solve_moments_autocov(series: &[f64], theta: f64, opts: &SolverOptions) -> Result<EstimateResult> {
    solve_autocov_stats(&AutocovStats::from_series(series, theta)?, theta, opts)
}

pub fn solve_autocov_stats(stats: &AutocovStats, theta: f64, opts: &SolverOptions) -> Result<EstimateResult> {
    let as_moments = SampleMoments {
        a1: stats.a1,
        a2: stats.a2,
        a3: 1.0,
        n: stats.n,
    };
    check_moment_inputs(&as_moments, theta)?;
    solve_system(&AutocovSystem { stats: *stats, theta }, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Moments,
    Autocov,
}

impl Estimator {
    pub fn estimate(&self, series: &[f64], theta: f64, opts: &SolverOptions) -> Result<EstimateResult> {
        match self {
            Estimator::Moments => solve_moments(&sample_moments(series)?, theta, opts),
            Estimator::Autocov => solve_moments_autocov(series, theta, opts),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationCell {
    pub parameter: String,
    pub n: u32,
    pub truth: f64,
    pub estimation: f64,
    pub deviation: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub truth: ModelParams,
    pub n_list: Vec<u32>,
    pub reps: u64,
    pub seed: u64,
    pub estimator: Estimator,
    /// Rows `alpha, mu, sigma2, mu_prime, s2` for each `n`.
    pub cells: Vec<ReplicationCell>,
    /// Per `n`: replications excluded for non-convergence or failure.
    pub excluded: Vec<(u32, u64)>,
}

pub const REPORT_PARAMETERS: [&str; 5] = ["alpha", "mu", "sigma2", "mu_prime", "s2"];

impl ReplicationReport {
    pub fn cell(&self, parameter: &str, n: u32) -> Option<&ReplicationCell> {
        self.cells.iter().find(|c| c.parameter == parameter && c.n == n)
    }

    /// CSV with header `parameter,truth,n,estimation,deviation,mse`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("parameter,truth,n,estimation,deviation,mse\n");
        for p in REPORT_PARAMETERS {
            for &n in &self.n_list {
                if let Some(c) = self.cell(p, n) {
                    let _ = writeln!(
                        s,
                        "{},{:?},{},{:?},{:?},{:?}",
                        c.parameter, c.truth, c.n, c.estimation, c.deviation, c.mse
                    );
                }
            }
        }
        s
    }

    fn table(&self, rows: &[(&str, &str)]) -> String {
        let mut s = String::from("| para | t-v |");
        for n in &self.n_list {
            let _ = write!(s, " n={n} estimation | n={n} deviation | n={n} MSE |");
        }
        s.push_str("\n|---|---|");
        for _ in &self.n_list {
            s.push_str("---|---|---|");
        }
        s.push('\n');
        for (key, label) in rows {
            let truth = self
                .cell(key, self.n_list[0])
                .map(|c| c.truth)
                .unwrap_or(f64::NAN);
            let _ = write!(s, "| {label} | {truth:.4} |");
            for &n in &self.n_list {
                match self.cell(key, n) {
                    Some(c) => {
                        let _ = write!(s, " {:.5} | {:.5} | {:.5} |", c.estimation, c.deviation, c.mse);
                    }
                    None => s.push_str(" - | - | - |"),
                }
            }
            s.push('\n');
        }
        s
    }

    /// Markdown in the layout of the moment-estimation table (rows alpha, mu,
    /// sigma^2; estimation/deviation/MSE per n), followed by the identifiable
    /// stationary pair.
    pub fn to_markdown(&self) -> String {
        let mut s = format!(
            "Moment estimation, {} replications per n, seed {}, estimator {:?}\n\n",
            self.reps, self.seed, self.estimator
        );
        s.push_str(&self.table(&[("alpha", "α"), ("mu", "μ"), ("sigma2", "σ²")]));
        if self.estimator == Estimator::Moments {
            s.push_str("\nα is not identified by the three raw moments; α̂ depends on the solver start.\n");
        }
        s.push_str("\nStationary law of ln Λ (identifiable):\n\n");
        s.push_str(&self.table(&[("mu_prime", "μ' = μ/(1-α)"), ("s2", "s² = σ²/(1-α²)")]));
        let excluded: u64 = self.excluded.iter().map(|e| e.1).sum();
        if excluded > 0 {
            let _ = writeln!(s, "\nExcluded replications: {excluded}");
        }
        s
    }
}

/// Seed of the replication stream for sample size `n`.
pub fn replication_seed(seed: u64, n: u32) -> u64 {
    mix64(seed ^ mix64(u64::from(n).wrapping_add(0x5EED)))
}

/// Simulates `reps` marginal series of each length in `n_list` (initial
/// log-intensity at the stationary mean), fits each, and tabulates mean
/// estimate, deviation from truth and MSE.
pub fn replication_study(
    truth: &ModelParams,
    n_list: &[u32],
    reps: u64,
    seed: u64,
    estimator: Estimator,
    opts: &SolverOptions,
) -> Result<ReplicationReport> {
    truth.validate()?;
    if reps < 1 || n_list.is_empty() {
        return Err(RiskError::Domain(
            "replication study needs reps >= 1 and a nonempty n list".into(),
        ));
    }
    let law = truth.stationary_law()?;
    let truths = [truth.alpha, truth.mu, truth.sigma2, law.mean_y, law.var_y];
    let mut cells = Vec::new();
    let mut excluded = Vec::new();
    for &n in n_list {
        let config = SimConfig::new(*truth, n, replication_seed(seed, n))
            .with_init(InitMode::StationaryMean)
            .with_sampling(SamplingMode::Marginal);
        let fits = replicate(config.seed, reps, |_, rng| {
            let series: Vec<f64> = sample_aggregate_series(&config, rng)?
                .iter()
                .map(|r| r.s_total)
                .collect();
            estimator.estimate(&series, truth.theta, opts)
        });
        let good: Vec<EstimateResult> = fits
            .into_iter()
            .filter_map(|f| f.ok().filter(|e| e.converged))
            .collect();
        excluded.push((n, reps - good.len() as u64));
        if good.is_empty() {
            continue;
        }
        let m = good.len() as f64;
        for (k, name) in REPORT_PARAMETERS.iter().enumerate() {
            let vals = good.iter().map(|e| match k {
                0 => e.alpha_hat,
                1 => e.mu_hat,
                2 => e.sigma2_hat,
                3 => e.mu_prime_hat,
                _ => e.s2_hat,
            });
            let (mut sum, mut sq) = (0.0, 0.0);
            for v in vals {
                sum += v;
                sq += (v - truths[k]).powi(2);
            }
            let estimation = sum / m;
            cells.push(ReplicationCell {
                parameter: name.to_string(),
                n,
                truth: truths[k],
                estimation,
                deviation: estimation - truths[k],
                mse: sq / m,
            });
        }
    }
    Ok(ReplicationReport {
        truth: *truth,
        n_list: n_list.to_vec(),
        reps,
        seed,
        estimator,
        cells,
        excluded,
    })
}
