//! Model parameters and the stationary law of the log-intensity.

use serde::{Deserialize, Serialize};

use crate::error::{guarded_exp, Result, RiskError};

/// Parameters of the log-AR(1) intensity and the exponential claim sizes.
///
/// `sigma2 = 0` is accepted as the degenerate (deterministic intensity) limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Autoregression coefficient, strictly inside (-1, 1).
    pub alpha: f64,
    /// Mean of the AR noise.
    pub mu: f64,
    /// Variance of the AR noise.
    pub sigma2: f64,
    /// Mean claim size.
    pub theta: f64,
}

impl ModelParams {
    pub fn new(alpha: f64, mu: f64, sigma2: f64, theta: f64) -> Result<Self> {
        let p = Self {
            alpha,
            mu,
            sigma2,
            theta,
        };
        p.validate()?;
        Ok(p)
    }

    /// The numerical-simulation setup: alpha = 0.6, mu = 0.8, sigma2 = 0.4, theta = 0.5.
    pub fn reference() -> Self {
        Self {
            alpha: 0.6,
            mu: 0.8,
            sigma2: 0.4,
            theta: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > -1.0 && self.alpha < 1.0) {
            return Err(RiskError::Domain(format!(
                "alpha = {} must lie strictly inside (-1, 1)",
                self.alpha
            )));
        }
        if !self.mu.is_finite() {
            return Err(RiskError::Domain(format!("mu = {} must be finite", self.mu)));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(RiskError::Domain(format!(
                "sigma2 = {} must be finite and nonnegative",
                self.sigma2
            )));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(RiskError::Domain(format!(
                "theta = {} must be finite and positive",
                self.theta
            )));
        }
        Ok(())
    }

    pub fn stationary_law(&self) -> Result<StationaryLaw> {
        stationary_law(self)
    }
}

/// Stationary mean and variance of `Y_t = ln Lambda_t`.
///
/// Every closed-form moment in the crate is a function of this pair (and
/// theta); alpha, mu and sigma2 enter only through [`stationary_law`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryLaw {
    pub mean_y: f64,
    pub var_y: f64,
}

impl StationaryLaw {
    pub fn new(mean_y: f64, var_y: f64) -> Result<Self> {
        if !mean_y.is_finite() || !(var_y >= 0.0 && var_y.is_finite()) {
            return Err(RiskError::Domain(format!(
                "stationary law needs finite mean and nonnegative variance, got ({mean_y}, {var_y})"
            )));
        }
        Ok(Self { mean_y, var_y })
    }

    pub fn sd_y(&self) -> f64 {
        self.var_y.sqrt()
    }

    /// `ln E[Lambda^n] = n mean_y + n^2 var_y / 2`.
    pub fn log_lambda_moment(&self, n: u32) -> f64 {
        let n = f64::from(n);
        n * self.mean_y + 0.5 * n * n * self.var_y
    }

    /// `E[Lambda^n]` for the lognormal `Lambda = exp(Y)`.
    pub fn lambda_moment(&self, n: u32) -> Result<f64> {
        guarded_exp(self.log_lambda_moment(n))
    }
}

pub fn stationary_law(params: &ModelParams) -> Result<StationaryLaw> {
    params.validate()?;
    let a = params.alpha;
    Ok(StationaryLaw {
        mean_y: params.mu / (1.0 - a),
        var_y: params.sigma2 / (1.0 - a * a),
    })
}
