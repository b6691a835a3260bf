//! Order statistics of conditional samples.
//!
//! Everything here concerns n i.i.d. draws from L(X | X > x) and their k-th
//! smallest value Z, the level the splitting algorithm climbs by. Densities
//! are assembled in log space so that n in the thousands stays finite, and
//! cdfs go through the regularized incomplete beta: with U = F(y; x),
//!
//! ```text
//!     P(Z <= y) = P(Binomial(n, U) >= k) = I_U(k, n - k + 1).
//! ```
//!
//! `theta_p` and `theta_v` are the inhomogeneous terms of the first- and
//! second-moment functional equations: the expected corrector (and squared
//! corrector) restricted to the event that the very next level already
//! clears the target.

use crate::models::RandomModel;
use crate::real::{real_u64, Real};
use crate::special::{beta_reg_int, ln_binomial};

/// Conditional cdf F(y; x) and survival S(y; x) through the hazard scale.
fn conditional_parts<T: Real, M: RandomModel<T> + ?Sized>(model: &M, x: T, y: T) -> (T, T) {
    if y <= x {
        return (T::zero(), T::one());
    }
    let gap = model.lambda(y) - model.lambda(x);
    (-(-gap).exp_m1(), (-gap).exp())
}

/// Density at y of the k-th order statistic of n conditional draws above x.
/// Requires 1 <= k <= n and survival(x) > 0.
pub fn density_fnk<T: Real, M: RandomModel<T> + ?Sized>(
    n: u64,
    k: u32,
    model: &M,
    x: T,
    y: T,
) -> T {
    assert!(k >= 1 && u64::from(k) <= n, "density_fnk: need 1 <= k <= n");
    let sx = model.survival(x);
    assert!(
        sx > T::zero(),
        "density_fnk: conditioning level has zero survival"
    );
    if y < x {
        return T::zero();
    }
    let (f_cond, s_cond) = conditional_parts(model, x, y);
    let pdf_cond = model.pdf(y) / sx;
    if pdf_cond <= T::zero() {
        return T::zero();
    }
    let k64 = u64::from(k);
    // ln [ k C(n,k) F^(k-1) (1-F)^(n-k) f ], with zero-power terms skipped
    // so 0 * ln 0 never forms.
    let mut ln_density = real_u64::<T>(k64).ln() + ln_binomial::<T>(n, k64) + pdf_cond.ln();
    if k64 > 1 {
        if f_cond <= T::zero() {
            return T::zero();
        }
        ln_density = ln_density + real_u64::<T>(k64 - 1) * f_cond.ln();
    }
    if n - k64 > 0 {
        if s_cond <= T::zero() {
            return T::zero();
        }
        ln_density = ln_density + real_u64::<T>(n - k64) * s_cond.ln();
    }
    ln_density.exp()
}

/// P(Z <= y) for the k-th order statistic Z of n conditional draws above x.
pub fn cdf_fnk<T: Real, M: RandomModel<T> + ?Sized>(n: u64, k: u32, model: &M, x: T, y: T) -> T {
    assert!(k >= 1 && u64::from(k) <= n, "cdf_fnk: need 1 <= k <= n");
    let sx = model.survival(x);
    assert!(
        sx > T::zero(),
        "cdf_fnk: conditioning level has zero survival"
    );
    if y <= x {
        return T::zero();
    }
    let (f_cond, _) = conditional_parts(model, x, y);
    beta_reg_int(u64::from(k), n - u64::from(k) + 1, f_cond)
}

/// P(the k-th order statistic of m conditional draws clears a), with the
/// convention that it is 1 when m < k (fewer than k draws can never put k
/// of them below a).
fn order_stat_clears<T: Real, M: RandomModel<T> + ?Sized>(
    m: u64,
    k: u32,
    model: &M,
    x: T,
    a: T,
) -> T {
    if m < u64::from(k) {
        T::one()
    } else {
        // Complement through the survival side: 1 - I_U(k, m-k+1) is
        // I_S(m-k+1, k), which keeps relative accuracy when the tail is
        // deep instead of rounding to 1 - 1 = 0.
        let (_, s_cond) = conditional_parts(model, x, a);
        beta_reg_int(m - u64::from(k) + 1, u64::from(k), s_cond)
    }
}

/// Expected corrector restricted to immediate success:
/// E[ C 1{Z >= a} ] for one selection step from level x with n particles.
/// Closed form S(a; x) * (1 - F_(n-1),k(a; x)). Requires 1 <= k <= n - 1.
pub fn theta_p<T: Real, M: RandomModel<T> + ?Sized>(n: u64, k: u32, model: &M, x: T, a: T) -> T {
    assert!(k >= 1 && u64::from(k) < n, "theta_p: need 1 <= k <= n - 1");
    if x >= a {
        return T::one();
    }
    let (_, s_cond) = conditional_parts(model, x, a);
    s_cond * order_stat_clears(n - 1, k, model, x, a)
}

/// Second-moment companion of [`theta_p`]: E[ C^2 1{Z >= a} ].
/// Closed form (1/n) S (1 - F_(n-1),k) + (1 - 1/n) S^2 (1 - F_(n-2),k);
/// the m < k convention extends it to k = n - 1.
pub fn theta_v<T: Real, M: RandomModel<T> + ?Sized>(n: u64, k: u32, model: &M, x: T, a: T) -> T {
    assert!(k >= 1 && u64::from(k) < n, "theta_v: need 1 <= k <= n - 1");
    if x >= a {
        return T::one();
    }
    let (_, s_cond) = conditional_parts(model, x, a);
    let inv_n = T::one() / real_u64::<T>(n);
    let first = inv_n * s_cond * order_stat_clears(n - 1, k, model, x, a);
    let second = (T::one() - inv_n) * s_cond * s_cond * order_stat_clears(n - 2, k, model, x, a);
    first + second
}
