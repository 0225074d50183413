//! Compound-Poisson risk model whose claim intensity is driven by a log-AR(1)
//! latent process.
//!
//! The model, at integer times `t = 1, 2, ...`:
//!
//! - `Y_t = alpha * Y_{t-1} + eps_t`, `eps_t ~ Normal(mu, sigma2)`
//! - `Lambda_t = exp(Y_t)`
//! - `N_t ~ Poisson(Lambda_t + t)`
//! - `S_t = X_1 + ... + X_{N_t}`, with `X_i ~ Exponential(mean theta)`
//! - `U(t) = u + c t - S_t`
//!
//! Modules:
//!
//! - [`moments`]: stationary law, lognormal moments, raw moments of `S_t`, MGFs.
//! - [`series`]: the exponential-lognormal moment series and its convergent
//!   quadrature counterpart.
//! - [`simulator`]: seed-deterministic path sampling and Monte Carlo ruin.
//! - [`estimation`]: method-of-moments fitting and the replication study.
//! - [`ruin`]: adjustment coefficient, exponential ruin bound and MC comparison.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimation;
pub mod moments;
pub mod params;
pub mod quadrature;
pub mod ruin;
pub mod series;
pub mod simulator;

pub use error::{Result, RiskError};
pub use estimation::{
    replication_study, sample_moments, solve_moments, solve_moments_autocov,
    theoretical_time_averaged_moments, EstimateResult, Estimator, ReplicationReport, SampleMoments,
    SolverOptions,
};
pub use moments::{
    lambda_moment, mean_s, mgf_claim, mgf_s, moment_set, third_moment_s, third_moment_s_paper, var_s,
    MgfEval, MomentSet,
};
pub use params::{stationary_law, ModelParams, StationaryLaw};
pub use ruin::{
    adjustment_coefficient_closed, adjustment_coefficient_newton, bound_vs_mc_report, lundberg_bound,
    mgf_identity_check, net_profit_min_premium, AdjustmentCoefficient, AdjustmentMethod, BoundReport,
    McComparison, MgfIdentityCheck, NewtonOptions, PremiumSetting,
};
pub use series::{exp_lambda_quadrature, exp_lambda_series, SeriesEval};
pub use simulator::{
    estimate_ruin_probability, ruin_curve, sample_aggregate_series, sample_claims_at, sample_claims_path,
    sample_lambda_path, sample_surplus_path, ClaimsPath, InitMode, PathRecord, RuinEstimate, SamplingMode,
    SimConfig,
};
