//! Adjustment coefficient and the exponential ruin bound
//! `psi(u) <= exp(-R u) E[exp(Lambda (M_x(R) - 1))]`.
//!
//! With exponential claims `R = (c - theta) / (c theta)` and
//! `z = M_x(R) - 1 = c/theta - 1 > 0`, so the constant is the lognormal
//! MGF at a positive argument, which is infinite. The report carries the
//! truncated series `C_N` and always raises `divergence_warning` in that case.

use serde::{Deserialize, Serialize};

use crate::error::{Result, RiskError};
use crate::moments::mgf_claim;
use crate::params::ModelParams;
use crate::series::{exp_lambda_quadrature_law, exp_lambda_series_law, SeriesEval};
use crate::simulator::{
    replicate, ruin_curve, sample_aggregate_series, InitMode, RuinEstimate, SamplingMode, SimConfig,
};

/// Premium income per unit time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PremiumSetting(f64);

impl PremiumSetting {
    pub fn new(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(RiskError::Domain(format!("premium c = {c} must be positive")));
        }
        Ok(Self(c))
    }

    pub fn c(&self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdjustmentMethod {
    ClosedForm,
    Newton,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdjustmentCoefficient {
    pub r_value: f64,
    pub method: AdjustmentMethod,
    pub iterations: usize,
    /// `|M_x(R) - 1 - R c|`.
    pub residual: f64,
}

/// Smallest premium satisfying the net-profit condition, `theta E[Lambda]`.
/// Exceeds theta whenever `mu' + s2/2 > 0`.
pub fn net_profit_min_premium(params: &ModelParams) -> Result<f64> {
    Ok(params.theta * params.stationary_law()?.lambda_moment(1)?)
}

fn check_premium(c: f64, theta: f64) -> Result<()> {
    PremiumSetting::new(c)?;
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(RiskError::Domain(format!("theta = {theta} must be positive")));
    }
    if c <= theta {
        return Err(RiskError::NoPositiveSolution { c, mean_claim: theta });
    }
    Ok(())
}

/// `R = (c - theta) / (c theta)`, the positive root of `M_x(r) - 1 = r c`.
pub fn adjustment_coefficient_closed(c: f64, theta: f64) -> Result<AdjustmentCoefficient> {
    check_premium(c, theta)?;
    let r = (c - theta) / (c * theta);
    Ok(AdjustmentCoefficient {
        r_value: r,
        method: AdjustmentMethod::ClosedForm,
        iterations: 0,
        residual: (mgf_claim(r, theta)? - 1.0 - r * c).abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// Required `|g(R)|` on exit.
    pub tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol: 1e-12,
        }
    }
}

/// `r -> (M(r), M'(r))` for exponential claims of mean `theta`.
pub fn exponential_claim_mgf(theta: f64) -> impl Fn(f64) -> (f64, f64) {
    move |r| {
        let d = 1.0 - r * theta;
        (1.0 / d, theta / (d * d))
    }
}

/// Safeguarded Newton iteration for the positive root of
/// `g(r) = M(r) - 1 - r c` on `(0, 1/theta)`.
///
/// `claim_mgf` returns `(M(r), M'(r))` and must be finite and convex on the
/// bracket. Starts at `0.5 (c - theta) / (c theta)`; any iterate that leaves
/// the current bracket is replaced by its midpoint.
pub fn adjustment_coefficient_newton<F>(
    claim_mgf: F,
    c: f64,
    theta: f64,
    opts: &NewtonOptions,
) -> Result<AdjustmentCoefficient>
where
    F: Fn(f64) -> (f64, f64),
{
    check_premium(c, theta)?;
    let g = |r: f64| {
        let (m, dm) = claim_mgf(r);
        (m - 1.0 - r * c, dm - c)
    };
    // g(0) = 0 and g'(0) = E[X] - c; a positive root needs g to dip below zero.
    let (_, slope0) = g(0.0);
    if slope0 >= 0.0 {
        return Err(RiskError::NoPositiveSolution { c, mean_claim: theta });
    }
    let mut lo = 0.0;
    let mut hi = 1.0 / theta;
    let (g_hi, _) = g(hi * (1.0 - 1e-9));
    if g_hi.is_finite() && g_hi <= 0.0 {
        return Err(RiskError::NoPositiveSolution { c, mean_claim: theta });
    }
    let mut r = 0.5 * (c - theta) / (c * theta);
    if !(r > lo && r < hi) {
        r = 0.5 * (lo + hi);
    }
    for it in 1..=opts.max_iter {
        let (gv, dg) = g(r);
        if gv < 0.0 {
            lo = r;
        } else if gv > 0.0 {
            hi = r;
        } else {
            return Ok(AdjustmentCoefficient {
                r_value: r,
                method: AdjustmentMethod::Newton,
                iterations: it,
                residual: 0.0,
            });
        }
        let mut next = r - gv / dg;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - r).abs() <= 4.0 * f64::EPSILON * r || hi - lo <= 4.0 * f64::EPSILON * r {
            let residual = g(next).0.abs();
            if residual <= opts.tol {
                return Ok(AdjustmentCoefficient {
                    r_value: next,
                    method: AdjustmentMethod::Newton,
                    iterations: it,
                    residual,
                });
            }
            return Err(RiskError::NonConvergence {
                iterations: it,
                last: next,
            });
        }
        r = next;
    }
    Err(RiskError::NonConvergence {
        iterations: opts.max_iter,
        last: r,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McComparison {
    pub estimates: Vec<RuinEstimate>,
    pub horizon: u32,
    pub reps: u64,
    /// Least-squares slope of `ln psi_hat` against `u` inside `fit_window`.
    pub fitted_slope: Option<f64>,
    pub fit_points: usize,
    pub fit_window: (f64, f64),
    pub notice: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    #[serde(rename = "R")]
    pub adjustment: AdjustmentCoefficient,
    pub c: f64,
    /// `M_x(R) - 1 = c/theta - 1`.
    pub z: f64,
    pub series: SeriesEval,
    pub u_grid: Vec<f64>,
    /// `exp(-R u) C_N` per grid point.
    pub bound_values: Vec<f64>,
    pub mc_comparison: Option<McComparison>,
    pub divergence_warning: bool,
    /// Premium is above theta but below the net-profit minimum.
    pub net_profit_warning: bool,
    pub min_premium: f64,
}

impl BoundReport {
    pub fn constant(&self) -> f64 {
        self.series.value()
    }
}

fn check_grid(u_grid: &[f64]) -> Result<()> {
    if let Some(u) = u_grid.iter().find(|u| !(**u >= 0.0 && u.is_finite())) {
        return Err(RiskError::Domain(format!(
            "initial surplus {u} must be finite and nonnegative"
        )));
    }
    Ok(())
}

pub fn lundberg_bound(params: &ModelParams, c: f64, u_grid: &[f64], truncation: u32) -> Result<BoundReport> {
    let law = params.stationary_law()?;
    check_grid(u_grid)?;
    let adjustment = adjustment_coefficient_closed(c, params.theta)?;
    let min_premium = net_profit_min_premium(params)?;
    // M_x(R) = c / theta exactly; computing it through the MGF would lose an ulp
    let z = c / params.theta - 1.0;
    let series = exp_lambda_series_law(&law, z, truncation)?;
    let constant = series.value();
    let bound_values = u_grid
        .iter()
        .map(|u| (-adjustment.r_value * u).exp() * constant)
        .collect();
    let divergence_warning = series.divergence_flag || (z > 0.0 && law.var_y > 0.0);
    Ok(BoundReport {
        adjustment,
        c,
        z,
        series,
        u_grid: u_grid.to_vec(),
        bound_values,
        mc_comparison: None,
        divergence_warning,
        net_profit_warning: c <= min_premium,
        min_premium,
    })
}

/// Fit window on `psi_hat` used for the decay-slope regression.
pub const SLOPE_FIT_WINDOW: (f64, f64) = (1e-3, 0.3);

/// Least-squares slope of `ln psi_hat` on `u` over estimates with
/// `psi_hat` strictly inside `window`. Needs at least three points.
pub fn fit_log_slope(estimates: &[RuinEstimate], window: (f64, f64)) -> (Option<f64>, usize) {
    let pts: Vec<(f64, f64)> = estimates
        .iter()
        .filter(|e| e.psi_hat > window.0 && e.psi_hat < window.1)
        .map(|e| (e.u, e.psi_hat.ln()))
        .collect();
    if pts.len() < 3 {
        return (None, pts.len());
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return (None, pts.len());
    }
    (Some(sxy / sxx), pts.len())
}

/// Bound values paired with Monte Carlo finite-horizon ruin estimates on the
/// same grid (cumulative sampling, common random numbers across `u`).
#[allow(clippy::too_many_arguments)]
pub fn bound_vs_mc_report(
    params: &ModelParams,
    c: f64,
    u_grid: &[f64],
    horizon: u32,
    reps: u64,
    truncation: u32,
    seed: u64,
    init_mode: InitMode,
) -> Result<BoundReport> {
    let mut report = lundberg_bound(params, c, u_grid, truncation)?;
    let config = SimConfig::new(*params, horizon, seed)
        .with_init(init_mode)
        .with_sampling(SamplingMode::Cumulative);
    let estimates = ruin_curve(&config, u_grid, c, reps)?;
    let (fitted_slope, fit_points) = fit_log_slope(&estimates, SLOPE_FIT_WINDOW);
    let notice = fitted_slope.is_none().then(|| {
        format!(
            "slope fit omitted: {fit_points} grid points with psi_hat in ({}, {}), need 3",
            SLOPE_FIT_WINDOW.0, SLOPE_FIT_WINDOW.1
        )
    });
    report.mc_comparison = Some(McComparison {
        estimates,
        horizon,
        reps,
        fitted_slope,
        fit_points,
        fit_window: SLOPE_FIT_WINDOW,
        notice,
    });
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MgfIdentityCheck {
    pub r: f64,
    pub t: u32,
    pub u: f64,
    pub c: f64,
    pub reps: u64,
    /// Monte Carlo mean of `exp(-r U(t))`.
    pub mc_mean: f64,
    pub mc_se: f64,
    /// `exp(-r u - r c t + t z) E[exp(z Lambda)]`, `z = M_x(r) - 1`.
    pub closed: f64,
    /// `(mc_mean - closed) / mc_se`.
    pub z_score: f64,
}

/// Checks `E[exp(-r U(t))] = e^{-ru} e^{-rct} e^{t(M_x(r)-1)} E[e^{(M_x(r)-1) Lambda_t}]`
/// at `r < 0`, where every expectation is finite. Paths are marginal with a
/// stationary initial draw so that `Lambda_t` has the stationary law.
#[allow(clippy::too_many_arguments)]
pub fn mgf_identity_check(
    params: &ModelParams,
    u: f64,
    c: f64,
    r: f64,
    t: u32,
    reps: u64,
    seed: u64,
) -> Result<MgfIdentityCheck> {
    if !(r < 0.0) {
        return Err(RiskError::Domain(format!(
            "identity check needs r < 0 (the right side diverges for r = {r} >= 0)"
        )));
    }
    if reps < 2 {
        return Err(RiskError::Domain("identity check needs at least 2 paths".into()));
    }
    check_grid(&[u])?;
    PremiumSetting::new(c)?;
    let law = params.stationary_law()?;
    let z = mgf_claim(r, params.theta)? - 1.0;
    let tf = f64::from(t);
    let closed = (-r * u - r * c * tf + tf * z).exp() * exp_lambda_quadrature_law(&law, z)?;

    let config = SimConfig::new(*params, t, seed)
        .with_init(InitMode::StationaryDraw)
        .with_sampling(SamplingMode::Marginal);
    let draws = replicate(seed, reps, |_, rng| {
        let recs = sample_aggregate_series(&config, rng)?;
        let s = recs.last().expect("horizon >= 1").s_total;
        Ok((-r * (u + c * tf - s)).exp())
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let n = reps as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    Ok(MgfIdentityCheck {
        r,
        t,
        u,
        c,
        reps,
        mc_mean: mean,
        mc_se: se,
        closed,
        z_score: if se > 0.0 { (mean - closed) / se } else { 0.0 },
    })
}
