use thiserror::Error;

/// Largest exponent argument accepted before a computation is reported as
/// out of range instead of overflowing to infinity.
pub const EXP_GUARD: f64 = 700.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RiskError {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("exponent argument {0} exceeds the overflow guard of {EXP_GUARD}")]
    Range(f64),

    #[error("no positive adjustment coefficient: premium c = {c} must exceed the mean claim {mean_claim}")]
    NoPositiveSolution { c: f64, mean_claim: f64 },

    #[error("solver did not converge after {iterations} iterations (last iterate {last})")]
    NonConvergence { iterations: usize, last: f64 },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("empty input")]
    EmptyInput,
}

pub type Result<T> = std::result::Result<T, RiskError>;

/// `exp(x)` with the overflow guard applied.
pub fn guarded_exp(x: f64) -> Result<f64> {
    if x > EXP_GUARD || x.is_nan() {
        Err(RiskError::Range(x))
    } else {
        Ok(x.exp())
    }
}
