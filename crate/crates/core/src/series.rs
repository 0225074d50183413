//! The exponential-lognormal moment series `E[exp(z Lambda)] ~ sum_n z^n/n! E[Lambda^n]`.
//!
//! For a lognormal `Lambda` the series diverges for every `z != 0` (the term
//! ratio grows like `exp(n var_y) / n`), and for `z > 0` the expectation itself
//! is infinite. Partial sums are therefore returned with diagnostics rather
//! than collapsed into a single number. For `z <= 0` the expectation is finite
//! and [`exp_lambda_quadrature`] computes it directly.

use serde::{Deserialize, Serialize};

use crate::error::{guarded_exp, Result, RiskError, EXP_GUARD};
use crate::params::{ModelParams, StationaryLaw};
use crate::quadrature::integrate;

/// Half-width of the integration window, in standard deviations of `Y`.
pub const QUADRATURE_WINDOW_SD: f64 = 10.0;
/// Relative tolerance of the quadrature oracle.
pub const QUADRATURE_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesEval {
    pub z: f64,
    pub truncation_order: u32,
    /// Terms `z^n/n! E[Lambda^n]` for `n = 0..=N`.
    pub terms: Vec<f64>,
    /// Partial sums `C_0, ..., C_N`.
    pub partial_sums: Vec<f64>,
    /// Term ratio `T_{N+1} / T_N`.
    pub last_term_ratio: f64,
    /// `|last_term_ratio| > 1` and the absolute ratios increased over the last three indices.
    pub divergence_flag: bool,
}

impl SeriesEval {
    /// The highest-order partial sum `C_N`.
    pub fn value(&self) -> f64 {
        *self.partial_sums.last().expect("at least one term")
    }
}

/// Ratio of consecutive series terms, `T_{n+1} / T_n = z exp(mean_y + (2n+1) var_y / 2) / (n+1)`.
pub fn term_ratio(law: &StationaryLaw, z: f64, n: u32) -> f64 {
    let n = f64::from(n);
    z * (law.mean_y + (2.0 * n + 1.0) * law.var_y / 2.0).exp() / (n + 1.0)
}

pub fn exp_lambda_series(params: &ModelParams, z: f64, truncation: u32) -> Result<SeriesEval> {
    exp_lambda_series_law(&params.stationary_law()?, z, truncation)
}

pub(crate) fn exp_lambda_series_law(law: &StationaryLaw, z: f64, truncation: u32) -> Result<SeriesEval> {
    if !z.is_finite() {
        return Err(RiskError::Domain(format!(
            "series argument z = {z} must be finite"
        )));
    }
    let mut terms = Vec::with_capacity(truncation as usize + 1);
    let mut partial_sums = Vec::with_capacity(truncation as usize + 1);
    let mut ln_factorial = 0.0;
    let mut sum = 0.0;
    for n in 0..=truncation {
        if n > 0 {
            ln_factorial += f64::from(n).ln();
        }
        let term = if n == 0 {
            1.0
        } else if z == 0.0 {
            0.0
        } else {
            let nf = f64::from(n);
            let log_mag = nf * z.abs().ln() - ln_factorial + law.log_lambda_moment(n);
            if log_mag > EXP_GUARD {
                return Err(RiskError::Range(log_mag));
            }
            let sign = if z < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
            sign * log_mag.exp()
        };
        sum += term;
        terms.push(term);
        partial_sums.push(sum);
    }
    let ratios: Vec<f64> = (truncation.saturating_sub(2)..=truncation)
        .map(|n| term_ratio(law, z, n).abs())
        .collect();
    let last_term_ratio = term_ratio(law, z, truncation);
    let divergence_flag =
        truncation >= 2 && last_term_ratio.abs() > 1.0 && ratios.windows(2).all(|w| w[0] < w[1]);
    Ok(SeriesEval {
        z,
        truncation_order: truncation,
        terms,
        partial_sums,
        last_term_ratio,
        divergence_flag,
    })
}

/// `E[exp(z Lambda)]` for `z <= 0`, integrating `exp(z e^y)` against the
/// stationary normal density of `Y` over `mean_y +/- 10 sd`.
pub fn exp_lambda_quadrature(params: &ModelParams, z: f64) -> Result<f64> {
    exp_lambda_quadrature_law(&params.stationary_law()?, z)
}

pub(crate) fn exp_lambda_quadrature_law(law: &StationaryLaw, z: f64) -> Result<f64> {
    if !(z <= 0.0) {
        return Err(RiskError::Domain(format!(
            "E[exp(z Lambda)] is infinite for z = {z} > 0"
        )));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    if law.var_y == 0.0 {
        return Ok((z * guarded_exp(law.mean_y)?).exp());
    }
    let sd = law.sd_y();
    let lo = law.mean_y - QUADRATURE_WINDOW_SD * sd;
    let hi = law.mean_y + QUADRATURE_WINDOW_SD * sd;
    guarded_exp(hi)?;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * law.var_y).sqrt();
    let integrand = |y: f64| {
        let d = y - law.mean_y;
        (z * y.exp() - d * d / (2.0 * law.var_y)).exp() * norm
    };
    let q = integrate(integrand, lo, hi, QUADRATURE_REL_TOL)?;
    Ok(q.value.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_law() -> StationaryLaw {
        ModelParams::reference().stationary_law().unwrap()
    }

    #[test]
    fn zero_argument_sums_to_one() {
        let s = exp_lambda_series_law(&reference_law(), 0.0, 12).unwrap();
        assert!(s.partial_sums.iter().all(|&c| c == 1.0));
        assert!(!s.divergence_flag);
    }

    #[test]
    fn reference_series_diverges_at_eleven() {
        let law = reference_law();
        let s = exp_lambda_series_law(&law, 11.0, 20).unwrap();
        assert!(s.divergence_flag);
        assert!(s.partial_sums.windows(2).all(|w| w[1] > w[0]));
        // ratios dip from n = 0 to 1, then grow: flag first raised at N = 3
        assert!(!exp_lambda_series_law(&law, 11.0, 2).unwrap().divergence_flag);
        assert!(exp_lambda_series_law(&law, 11.0, 3).unwrap().divergence_flag);
    }

    #[test]
    fn ratio_formula_matches_term_division() {
        let law = reference_law();
        let s = exp_lambda_series_law(&law, 11.0, 20).unwrap();
        for n in 0..20u32 {
            let direct = s.terms[n as usize + 1] / s.terms[n as usize];
            let formula = term_ratio(&law, 11.0, n);
            assert!((direct - formula).abs() / formula.abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn negative_argument_oscillates() {
        let law = ModelParams::new(0.3, 0.2, 0.2, 0.5)
            .unwrap()
            .stationary_law()
            .unwrap();
        let s = exp_lambda_series_law(&law, -0.5, 60).unwrap();
        let signs: Vec<bool> = s.terms.iter().skip(1).map(|t| *t < 0.0).collect();
        assert!(signs.windows(2).all(|w| w[0] != w[1]));
        // the oracle exists even though the partial sums do not settle on it
        let q = exp_lambda_quadrature_law(&law, -0.5).unwrap();
        assert!(q > 0.0 && q < 1.0);
        assert!(s.divergence_flag);
    }

    #[test]
    fn overflow_is_reported() {
        assert!(matches!(
            exp_lambda_series_law(&reference_law(), 11.0, 60),
            Err(RiskError::Range(_))
        ));
    }

    #[test]
    fn quadrature_edges() {
        let law = reference_law();
        assert_eq!(exp_lambda_quadrature_law(&law, 0.0).unwrap(), 1.0);
        assert!(exp_lambda_quadrature_law(&law, 0.1).is_err());
        let far = exp_lambda_quadrature_law(&law, -1e6).unwrap();
        assert!(far < 1e-100);
        let degenerate = StationaryLaw::new(0.0, 0.0).unwrap();
        assert!((exp_lambda_quadrature_law(&degenerate, -0.5).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn quadrature_agrees_with_taylor_for_tiny_argument() {
        // for |z| small the first few terms approximate well
        let law = ModelParams::new(0.3, 0.2, 0.2, 0.5)
            .unwrap()
            .stationary_law()
            .unwrap();
        let z = -1e-3;
        let s = exp_lambda_series_law(&law, z, 3).unwrap();
        let q = exp_lambda_quadrature_law(&law, z).unwrap();
        assert!((s.value() - q).abs() < 1e-10);
    }

    proptest::proptest! {
        #[test]
        fn quadrature_in_unit_interval_and_monotone(z1 in -20.0f64..0.0, dz in 0.0f64..5.0,
                                                    mean in -1.0f64..2.0, var in 0.01f64..0.8) {
            let law = StationaryLaw::new(mean, var).unwrap();
            let z2 = (z1 + dz).min(0.0);
            let a = exp_lambda_quadrature_law(&law, z1).unwrap();
            let b = exp_lambda_quadrature_law(&law, z2).unwrap();
            proptest::prop_assert!(a > 0.0 && a <= 1.0);
            proptest::prop_assert!(b >= a * (1.0 - 1e-9));
        }

        #[test]
        fn partial_sums_nondecreasing_for_positive_z(z in 0.01f64..5.0, n in 0u32..25) {
            let law = StationaryLaw::new(0.2, 0.3).unwrap();
            let s = exp_lambda_series_law(&law, z, n).unwrap();
            // terms are strictly positive; once they drop below one ulp of the
            // running sum the floating-point partial sums stop moving
            proptest::prop_assert!(s.terms.iter().all(|t| *t > 0.0));
            proptest::prop_assert!(s.partial_sums.windows(2).all(|w| w[1] >= w[0]));
        }
    }
}
