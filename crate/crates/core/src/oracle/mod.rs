//! Independent predictions for the splitting estimator.
//!
//! Three routes to the same quantities, sharing as little code as possible
//! with the sampler and with each other:
//!
//! * [`coeffs`]: exact integer recursion tables behind the characteristic
//!   polynomials (num-bigint, no floating point).
//! * [`roots`]: characteristic roots of the second-moment and
//!   iteration-count equations (companion matrix plus Newton polish).
//! * [`spectral`]: closed-form solutions assembled from those roots by
//!   solving small complex linear systems.
//! * [`grid`]: a direct Volterra quadrature solver for the functional
//!   equations, sharing only the order-statistic kernel with the rest of
//!   the crate.
//! * [`asymptotics`]: large-n expansions and the sampling-cost model built
//!   on top of the oracles.

pub mod asymptotics;
pub mod coeffs;
pub mod grid;
pub mod roots;
pub mod spectral;

pub use asymptotics::{
    ams_cost, cost_dimensionless, cost_dimensionless_exact, cost_dimensionless_limit,
    cost_dimensionless_second, direct_cost, mean_iterations_expansion, mean_steps_k1,
    variance_expansion, variance_k1, variance_leading, CostModel,
};
pub use coeffs::{recursion_coeffs, CoefficientTable};
pub use grid::{solve_functional_equation, solve_refined, FunctionalKind, GridSolution};
pub use roots::{char_roots, CharKind};
pub use spectral::{m_nk, spectral_t, spectral_v, SpectralSolution};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("invalid oracle parameters: {0}")]
    InvalidParameters(String),
    #[error("exact tables are capped at k <= {cap}, got k = {k}")]
    KTooLarge { k: u32, cap: u32 },
    #[error("characteristic roots too close to use (min distance {min_dist:.3e})")]
    NearDegenerateRoots { min_dist: f64 },
    #[error("no sign change bracketing the distinguished root in [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },
    #[error("spectral linear system is too ill-conditioned (residual {residual:.3e})")]
    IllConditioned { residual: f64 },
    #[error("quadrature grid of {grid} intervals is too coarse (implicit step not contractive)")]
    GridTooCoarse { grid: usize },
    #[error(transparent)]
    Model(#[from] crate::models::ModelError),
}
