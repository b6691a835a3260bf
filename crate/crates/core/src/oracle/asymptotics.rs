//! Large-n expansions and the sampling-cost model.
//!
//! Everything here is written in terms of a = -ln p, the hazard distance
//! between the start and the target. The expansions are cross-checked in
//! the test suite against the spectral solutions, which are exact up to
//! root-finding precision; the k = 1 formulas are closed forms and serve
//! as anchors for the general-k coefficients.
//!
//! The headline quantity is the dimensionless cost
//!
//! ```text
//!     C(n, k) = Var[p_hat] / p^2 * E[samples drawn],
//! ```
//!
//! which is invariant under replication: splitting a budget over M
//! independent runs leaves C unchanged, so C is the right basis for
//! comparing against plain Monte Carlo. As n grows, C(n, k) decreases to
//! the k-independent limit (ln p)^2 - ln p.

use serde::{Deserialize, Serialize};

use super::spectral::{spectral_t, spectral_v};
use super::OracleError;

fn hazard_gap(p: f64) -> f64 {
    assert!(
        p > 0.0 && p < 1.0,
        "probability must lie in (0, 1), got {p}"
    );
    -p.ln()
}

// --- exact k = 1 forms ------------------------------------------------------

/// E[levels in the trace] = E[J] + 1 for k = 1: n a + 1 exactly.
pub fn mean_steps_k1(p: f64, n: u64) -> f64 {
    n as f64 * hazard_gap(p) + 1.0
}

/// Estimator variance for k = 1: p^2 (p^(-1/n) - 1) exactly.
pub fn variance_k1(p: f64, n: u64) -> f64 {
    let a = hazard_gap(p);
    p * p * ((a / n as f64).exp_m1())
}

// --- expansions in 1/n ------------------------------------------------------

/// Leading-order variance p^2 a / n, the same for every k.
pub fn variance_leading(p: f64, n: u64) -> f64 {
    p * p * hazard_gap(p) / n as f64
}

/// Variance through second order:
/// p^2 [ a/n + (a^2 + (k - 1) a) / (2 n^2) ].
///
/// The k = 1 case must and does reproduce the Taylor series of the exact
/// form `variance_k1`, which pins the a^2 term.
pub fn variance_expansion(p: f64, n: u64, k: u32) -> f64 {
    let a = hazard_gap(p);
    let nf = n as f64;
    let kf = f64::from(k);
    p * p * (a / nf + (a * a + (kf - 1.0) * a) / (2.0 * nf * nf))
}

/// Mean level count through the constant term:
/// T ~ a (n/k - (k - 1)/(2k)) + (k + 1)/(2k).
///
/// The constant (k + 1)/(2k) follows from the closed-form k = 2 solution
/// (and agrees with the exact k = 1 value of 1); the remainder decays like
/// a/(8n) for k = 2.
pub fn mean_iterations_expansion(p: f64, n: u64, k: u32) -> f64 {
    let a = hazard_gap(p);
    let nf = n as f64;
    let kf = f64::from(k);
    a * (nf / kf - (kf - 1.0) / (2.0 * kf)) + (kf + 1.0) / (2.0 * kf)
}

// --- dimensionless cost -----------------------------------------------------

/// Relative variance times expected sample count, assembled from a second
/// moment v = E[p_hat^2 from 0] and a mean level count t = E[J] + 1.
pub fn cost_dimensionless(v: f64, t: f64, p: f64, n: u64, k: u32) -> f64 {
    let rel_var = (v - p * p) / (p * p);
    rel_var * (f64::from(k) * t + n as f64 - f64::from(k))
}

/// Exact dimensionless cost via the spectral oracles.
pub fn cost_dimensionless_exact(n: u64, k: u32, p: f64) -> Result<f64, OracleError> {
    let a = hazard_gap(p);
    let v = spectral_v(n, k, a)?.evaluate(0.0);
    let t = spectral_t(n, k, a)?.evaluate(0.0);
    Ok(cost_dimensionless(v, t, p, n, k))
}

/// Large-n limit of the dimensionless cost: (ln p)^2 - ln p.
pub fn cost_dimensionless_limit(p: f64) -> f64 {
    let a = hazard_gap(p);
    a * a + a
}

/// Cost through second order: the 1/n correction a^2 (a + 1) / (2n) does
/// not depend on k, which the spectral cross-checks confirm.
pub fn cost_dimensionless_second(p: f64, n: u64) -> f64 {
    let a = hazard_gap(p);
    cost_dimensionless_limit(p) + a * a * (a + 1.0) / (2.0 * n as f64)
}

// --- wall-clock cost model --------------------------------------------------

/// Per-sample cost parameters for comparing splitting against direct
/// sampling at a target relative RMS error.
///
/// `c0` prices one conditional draw; `c1 * ln n` prices the bookkeeping
/// a sorted population of size n adds to each draw. `epsilon` is the
/// target relative standard error of the final estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub c0: f64,
    pub c1: f64,
    pub epsilon: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            c0: 1.0,
            c1: 0.0,
            epsilon: 0.1,
        }
    }
}

/// Work to reach relative error epsilon with splitting:
/// (c0 + c1 ln n) C / epsilon^2.
pub fn ams_cost(model: &CostModel, n: u64, c_dimensionless: f64) -> f64 {
    assert!(model.epsilon > 0.0, "epsilon must be positive");
    (model.c0 + model.c1 * (n as f64).ln()) * c_dimensionless / (model.epsilon * model.epsilon)
}

/// Work to reach the same error with direct Monte Carlo:
/// c0 (1 - p) / (epsilon^2 p), from Var[indicator] = p(1 - p).
pub fn direct_cost(model: &CostModel, p: f64) -> f64 {
    assert!(model.epsilon > 0.0, "epsilon must be positive");
    assert!(
        p > 0.0 && p < 1.0,
        "probability must lie in (0, 1), got {p}"
    );
    model.c0 * (1.0 - p) / (model.epsilon * model.epsilon * p)
}

// ---------------------------------------------------------------------------
