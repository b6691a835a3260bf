//! Adaptive multilevel splitting with exact conditional resampling.
//!
//! Rare-event estimation of p = P(X >= a) for a one-dimensional law: n
//! particles, the k lowest killed and redrawn from the exact conditional
//! law each iteration, unbiased estimator C (1 - k/n)^J. The point of the
//! crate is not only the sampler but the verification net around it:
//!
//! * [`models`]: the law catalog (exponential, Pareto and Weibull tails,
//!   a committor toy with an atom), hazard-scale conditional sampling, the
//!   atom-smearing tilde transform.
//! * [`order_stats`]: conditional order-statistic densities and cdfs, and
//!   the one-step success weights `theta_p` / `theta_v`.
//! * [`ams`]: the splitting driver, direct Monte Carlo, unstopped runs for
//!   distributional checks, hazard-scale views.
//! * [`oracle`]: independent predictions of the estimator's moments and
//!   the iteration count: exact integer coefficient tables, characteristic
//!   roots, spectral solutions, a Volterra quadrature solver, asymptotic
//!   expansions and the resulting cost model.
//! * [`stats`]: replication harness and the hypothesis tests (z, chi
//!   squared, Kolmogorov-Smirnov) that compare sampler output to oracles.
//! * [`verify`]: the acceptance suite wiring the two sides together.
//!
//! Everything numeric is generic over [`real::Real`] (`f64` in production,
//! `f32` compiles for honesty); exact integer and rational arithmetic backs
//! the oracle tables. All randomness flows through the counter-based
//! [`rng::CounterRng`], so every artifact is reproducible from a 64-bit
//! seed.

pub mod ams;
pub mod models;
pub mod oracle;
pub mod order_stats;
pub mod real;
pub mod rng;
pub mod special;
pub mod stats;
pub mod verify;

pub use ams::{
    estimate, run_ams, run_ams_from, run_direct_mc, run_unstopped, transformed_view, AmsConfig,
    AmsError, AmsResult, AmsState,
};
pub use models::{
    cdf_conditional, lambda_between, sample_conditional, tilde_transform, CommittorToy,
    Exponential, ModelError, ModelKind, ModelSpec, Pareto, RandomModel, Weibull,
};
pub use real::Real;
pub use rng::CounterRng;

/// Concrete aliases for the working scalar type.
pub type AmsConfig64 = AmsConfig<f64>;
pub type AmsResult64 = AmsResult<f64>;
pub type ModelKind64 = ModelKind<f64>;
