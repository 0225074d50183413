//! Closed-form moments of the aggregate claims `S_t`.
//!
//! Given the intensity `lambda = Lambda_t + t`, `S_t` is compound Poisson with
//! exponential claims, so `E[S | lambda] = theta lambda`,
//! `E[S^2 | lambda] = theta^2 (2 lambda + lambda^2)` and
//! `E[S^3 | lambda] = theta^3 (6 lambda + 6 lambda^2 + lambda^3)`.
//! Averaging over the stationary lognormal `Lambda_t` gives everything below.

use serde::{Deserialize, Serialize};

use crate::error::{guarded_exp, Result, RiskError};
use crate::params::{ModelParams, StationaryLaw};
use crate::series::{exp_lambda_quadrature_law, exp_lambda_series_law, SeriesEval};

/// First three raw moments of `S_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    pub t: u32,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
}

/// `E[Lambda^n] = exp(n mean_y + n^2 var_y / 2)`.
pub fn lambda_moment(params: &ModelParams, n: u32) -> Result<f64> {
    params.stationary_law()?.lambda_moment(n)
}

pub(crate) fn lambdas(law: &StationaryLaw) -> Result<[f64; 3]> {
    Ok([
        law.lambda_moment(1)?,
        law.lambda_moment(2)?,
        law.lambda_moment(3)?,
    ])
}

/// `E[S_t] = theta (E[Lambda] + t)`.
pub fn mean_s(params: &ModelParams, t: u32) -> Result<f64> {
    let law = params.stationary_law()?;
    Ok(params.theta * (law.lambda_moment(1)? + f64::from(t)))
}

/// `Var(S_t) = 2 theta^2 (L1 + t) + theta^2 (L2 - L1^2)`.
///
/// The first term is `E[N] (Var X + E^2 X)`, the second `E^2 X Var(Lambda)`.
pub fn var_s(params: &ModelParams, t: u32) -> Result<f64> {
    let law = params.stationary_law()?;
    let [l1, l2, _] = lambdas(&law)?;
    let th2 = params.theta * params.theta;
    Ok(2.0 * th2 * (l1 + f64::from(t)) + th2 * (l2 - l1 * l1))
}

/// `E[S_t^3]` from the compound-Poisson expansion
/// `theta^3 [6 E(lambda) + 6 E(lambda^2) + E(lambda^3)]`, `lambda = Lambda_t + t`.
pub fn third_moment_s(params: &ModelParams, t: u32) -> Result<f64> {
    let law = params.stationary_law()?;
    let [l1, l2, l3] = lambdas(&law)?;
    let t = f64::from(t);
    let e1 = l1 + t;
    let e2 = l2 + 2.0 * t * l1 + t * t;
    let e3 = l3 + 3.0 * t * l2 + 3.0 * t * t * l1 + t * t * t;
    Ok(params.theta.powi(3) * (6.0 * e1 + 6.0 * e2 + e3))
}

/// The published closed form for `E[S_t^3]`, evaluated as printed:
///
/// `theta^3 (6t + 6t^2 + t^3) + 3 theta^3 (2t + t^2) e^{m + v/2}
///  + 3 theta^3 t e^{2m + 4v} + theta^3 e^{3m + 9v/2}`
///
/// with `m = mean_y`, `v = var_y`. It omits the `6 L1 + 6 L2` terms present at
/// `t = 0` and carries `4v` where the expansion has `2v`, so it disagrees with
/// simulated data. Kept only for comparison against [`third_moment_s`].
pub fn third_moment_s_paper(params: &ModelParams, t: u32) -> Result<f64> {
    let law = params.stationary_law()?;
    let (m, v) = (law.mean_y, law.var_y);
    let t = f64::from(t);
    let th3 = params.theta.powi(3);
    Ok(th3 * (6.0 * t + 6.0 * t * t + t * t * t)
        + 3.0 * th3 * (2.0 * t + t * t) * guarded_exp(m + v / 2.0)?
        + 3.0 * th3 * t * guarded_exp(2.0 * m + 4.0 * v)?
        + th3 * guarded_exp(3.0 * m + 4.5 * v)?)
}

pub fn moment_set(params: &ModelParams, t: u32) -> Result<MomentSet> {
    let m1 = mean_s(params, t)?;
    let m2 = var_s(params, t)? + m1 * m1;
    let m3 = third_moment_s(params, t)?;
    Ok(MomentSet { t, m1, m2, m3 })
}

/// Coefficients of the raw moments of `S` as affine functions of
/// `(L1, L2, L3)`: row `j` holds `[const, c1, c2, c3]` with
/// `E[S^{j+1}] = theta^{j+1} (const + c1 L1 + c2 L2 + c3 L3)`.
///
/// `p = (mean t, mean t^2, mean t^3)` is the empirical power moment of the
/// time index: `(t, t^2, t^3)` for a single time, averages over `t = 1..n`
/// for the expectation of pooled sample moments.
pub(crate) fn moment_coefficients(p: [f64; 3]) -> [[f64; 4]; 3] {
    let [p1, p2, p3] = p;
    [
        [p1, 1.0, 0.0, 0.0],
        [2.0 * p1 + p2, 2.0 + 2.0 * p1, 1.0, 0.0],
        [
            6.0 * p1 + 6.0 * p2 + p3,
            6.0 + 12.0 * p1 + 3.0 * p2,
            6.0 + 3.0 * p1,
            1.0,
        ],
    ]
}

pub(crate) fn raw_moments_from_law(law: &StationaryLaw, theta: f64, p: [f64; 3]) -> Result<[f64; 3]> {
    let l = lambdas(law)?;
    let coef = moment_coefficients(p);
    let mut out = [0.0; 3];
    let mut scale = 1.0;
    for (j, row) in coef.iter().enumerate() {
        scale *= theta;
        out[j] = scale * (row[0] + row[1] * l[0] + row[2] * l[1] + row[3] * l[2]);
    }
    Ok(out)
}

/// Exponential claim MGF `1 / (1 - r theta)`, defined for `r < 1/theta`.
pub fn mgf_claim(r: f64, theta: f64) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(RiskError::Domain(format!("theta = {theta} must be positive")));
    }
    if !(r * theta < 1.0) {
        return Err(RiskError::Domain(format!(
            "claim MGF undefined at r = {r} >= 1/theta = {}",
            1.0 / theta
        )));
    }
    Ok(1.0 / (1.0 - r * theta))
}

/// Evaluation of `M_{S_t}(r) = exp(t z) E[exp(z Lambda)]`, `z = M_x(r) - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MgfEval {
    pub r: f64,
    pub t: u32,
    pub z: f64,
    /// `exp(t z)`.
    pub prefactor: f64,
    /// Prefactor times the quadrature value (r <= 0) or the last partial sum (r > 0).
    pub value: f64,
    /// Present when the series route was used.
    pub series: Option<SeriesEval>,
    /// True when `E[exp(z Lambda)]` is infinite, i.e. `z > 0` with a random intensity.
    pub divergent: bool,
}

/// MGF of `S_t`. For `r <= 0` the lognormal factor is integrated numerically;
/// for `r > 0` it is formally infinite and the truncated series is returned
/// with the divergence flag set.
pub fn mgf_s(params: &ModelParams, r: f64, t: u32, truncation: u32) -> Result<MgfEval> {
    let law = params.stationary_law()?;
    let z = mgf_claim(r, params.theta)? - 1.0;
    let prefactor = guarded_exp(f64::from(t) * z)?;
    if z <= 0.0 {
        let e = exp_lambda_quadrature_law(&law, z)?;
        Ok(MgfEval {
            r,
            t,
            z,
            prefactor,
            value: prefactor * e,
            series: None,
            divergent: false,
        })
    } else {
        let series = exp_lambda_series_law(&law, z, truncation)?;
        let divergent = series.divergence_flag || law.var_y > 0.0;
        Ok(MgfEval {
            r,
            t,
            z,
            prefactor,
            value: prefactor * series.value(),
            series: Some(series),
            divergent,
        })
    }
}
