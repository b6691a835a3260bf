//! Closed-form moment solutions assembled from characteristic roots.
//!
//! In the exponential case the second moment of the estimator started from
//! level x is a pure exponential sum,
//!
//! ```text
//!     v(x) = sum_l eta_l exp(beta_l (x - a)),
//! ```
//!
//! and the expected level count T(x) = E[J] + 1 is affine plus exponentials,
//!
//! ```text
//!     T(x) = Delta (a - x) + delta_1 + sum_(l>=2) delta_l exp(alpha_l (x - a)),
//! ```
//!
//! where beta_l / alpha_l are the `roots` module's output. The weights are
//! pinned by the value and derivatives at the target, which the functional
//! equations fix explicitly: v has m-th derivative 1/n + (1 - 1/n) 2^m at a
//! (m < k), T has value 1, slope -Delta and vanishing higher derivatives.
//! Delta itself is exactly the reciprocal of M = sum_(j<k) 1/(n-j), kept as
//! a rational.
//!
//! Conditioning caveat: the Vandermonde systems involve root powers up to
//! k - 1 at magnitude O(n), so large n with large k is intentionally out of
//! scope here (the residual check rejects it); the quadrature oracle has no
//! such restriction.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};

use super::roots::{char_roots, CharKind};
use super::OracleError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolutionKind {
    /// v(x) = E[p_hat^2 from level x].
    SecondMoment,
    /// T(x) = E[levels computed from x] = E[J] + 1.
    MeanIterations,
}

/// Exact M = sum_(j=0)^(k-1) 1/(n - j), the mean hazard gap swallowed per
/// iteration; its reciprocal is the slope of T.
pub fn m_nk(n: u64, k: u32) -> Result<BigRational, OracleError> {
    if k < 1 || u64::from(k) >= n {
        return Err(OracleError::InvalidParameters(format!(
            "need 1 <= k <= n - 1, got n = {n}, k = {k}"
        )));
    }
    let mut m = BigRational::zero();
    for j in 0..u64::from(k) {
        m += BigRational::new(BigInt::from(1), BigInt::from(n - j));
    }
    Ok(m)
}

/// An exponential-sum solution with optional affine part.
#[derive(Clone, Debug)]
pub struct SpectralSolution {
    pub n: u64,
    pub k: u32,
    pub a: f64,
    pub kind: SolutionKind,
    /// Exponents (characteristic roots; the zero root of the time equation
    /// is folded into `constant` and `slope` instead).
    pub exponents: Vec<Complex64>,
    /// Weights matching `exponents`.
    pub weights: Vec<Complex64>,
    /// delta_1 for MeanIterations, 0 for SecondMoment.
    pub constant: f64,
    /// Delta for MeanIterations, 0 for SecondMoment.
    pub slope: f64,
    /// Exact slope, kept for identity checks.
    pub slope_exact: Option<BigRational>,
}

impl SpectralSolution {
    pub fn evaluate_complex(&self, x: f64) -> Complex64 {
        let mut acc = Complex64::new(self.constant + self.slope * (self.a - x), 0.0);
        for (w, b) in self.weights.iter().zip(&self.exponents) {
            acc += w * (b * (x - self.a)).exp();
        }
        acc
    }

    /// Real part of the reconstruction; the imaginary part is a numerical
    /// residual of conjugate pairing (see `max_imag_on`).
    pub fn evaluate(&self, x: f64) -> f64 {
        self.evaluate_complex(x).re
    }

    /// Largest stray imaginary magnitude across sample points.
    pub fn max_imag_on(&self, xs: &[f64]) -> f64 {
        xs.iter()
            .map(|&x| self.evaluate_complex(x).im.abs())
            .fold(0.0, f64::max)
    }
}

fn solve_dense(
    a_mat: DMatrix<Complex64>,
    b: DVector<Complex64>,
) -> Result<DVector<Complex64>, OracleError> {
    let residual_scale = b.iter().map(|z| z.norm()).fold(1.0f64, f64::max);
    let lu = a_mat.clone().lu();
    let x = lu.solve(&b).ok_or(OracleError::IllConditioned {
        residual: f64::INFINITY,
    })?;
    let residual = (&a_mat * &x - &b)
        .iter()
        .map(|z| z.norm())
        .fold(0.0f64, f64::max)
        / residual_scale;
    if residual > 1e-9 {
        return Err(OracleError::IllConditioned { residual });
    }
    Ok(x)
}

/// Second-moment solution: weights from the k derivative conditions at a.
pub fn spectral_v(n: u64, k: u32, a: f64) -> Result<SpectralSolution, OracleError> {
    if !(a.is_finite() && a >= 0.0) {
        return Err(OracleError::InvalidParameters(format!(
            "target must be finite and nonnegative, got {a}"
        )));
    }
    let roots = char_roots(n, k, CharKind::Variance)?;
    let ku = k as usize;
    let a_mat = DMatrix::<Complex64>::from_fn(ku, ku, |m, l| roots[l].powu(m as u32));
    let nf = n as f64;
    let b = DVector::<Complex64>::from_fn(ku, |m, _| {
        Complex64::new(1.0 / nf + (1.0 - 1.0 / nf) * 2.0f64.powi(m as i32), 0.0)
    });
    let weights = solve_dense(a_mat, b)?;
    let solution = SpectralSolution {
        n,
        k,
        a,
        kind: SolutionKind::SecondMoment,
        exponents: roots,
        weights: weights.iter().copied().collect(),
        constant: 0.0,
        slope: 0.0,
        slope_exact: None,
    };
    // Boundary identity v(a) = 1 must hold to solver precision.
    let boundary = (solution.evaluate(a) - 1.0).abs();
    if boundary > 1e-9 {
        return Err(OracleError::IllConditioned { residual: boundary });
    }
    Ok(solution)
}

/// Mean-iteration solution: exact slope 1/M, weights from value and
/// derivative conditions at a.
pub fn spectral_t(n: u64, k: u32, a: f64) -> Result<SpectralSolution, OracleError> {
    if !(a.is_finite() && a >= 0.0) {
        return Err(OracleError::InvalidParameters(format!(
            "target must be finite and nonnegative, got {a}"
        )));
    }
    let m = m_nk(n, k)?;
    let slope_exact = m.recip();
    let slope = slope_exact
        .to_f64()
        .ok_or_else(|| OracleError::InvalidParameters("slope overflow".to_string()))?;

    let roots = char_roots(n, k, CharKind::Time)?;
    debug_assert!(roots[0].norm() == 0.0);
    let nonzero: Vec<Complex64> = roots[1..].to_vec();
    let ku = k as usize;

    // Unknowns [delta_1, delta_2, ..., delta_k]:
    //   row 0:   delta_1 + sum delta_l = 1          (T(a) = 1)
    //   row 1:   sum delta_l alpha_l   = Delta      (T'(a) = 0)
    //   row m:   sum delta_l alpha_l^m = 0          (T^(m)(a) = 0, m < k)
    let a_mat = DMatrix::<Complex64>::from_fn(ku, ku, |m, l| {
        if l == 0 {
            Complex64::new(if m == 0 { 1.0 } else { 0.0 }, 0.0)
        } else {
            nonzero[l - 1].powu(m as u32)
        }
    });
    let b = DVector::<Complex64>::from_fn(ku, |m, _| match m {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(slope, 0.0),
        _ => Complex64::new(0.0, 0.0),
    });
    let sol = solve_dense(a_mat, b)?;

    let constant = sol[0].re;
    if sol[0].im.abs() > 1e-9 {
        return Err(OracleError::IllConditioned {
            residual: sol[0].im.abs(),
        });
    }
    let solution = SpectralSolution {
        n,
        k,
        a,
        kind: SolutionKind::MeanIterations,
        exponents: nonzero,
        weights: sol.iter().skip(1).copied().collect(),
        constant,
        slope,
        slope_exact: Some(slope_exact),
    };
    let boundary = (solution.evaluate(a) - 1.0).abs();
    if boundary > 1e-9 {
        return Err(OracleError::IllConditioned { residual: boundary });
    }
    Ok(solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_bigint::BigInt;

    #[test]
    fn m_values() {
        assert_eq!(m_nk(10, 1).unwrap(), BigRational::new(1.into(), 10.into()));
        assert_eq!(m_nk(10, 2).unwrap(), BigRational::new(19.into(), 90.into()));
        // Harmonic tail for k = n - 1.
        let m = m_nk(4, 3).unwrap();
        assert_eq!(m, BigRational::new(13.into(), 12.into()));
        assert!(m_nk(5, 5).is_err());
    }

    #[test]
    fn second_moment_k1_closed_form() {
        // v(x) = exp((2 - 1/n)(x - a)).
        for n in [5u64, 50, 500] {
            let s = spectral_v(n, 1, 1.0).unwrap();
            for &x in &[0.0, 0.3, 0.99, 1.0] {
                let expect = ((2.0 - 1.0 / n as f64) * (x - 1.0)).exp();
                assert_relative_eq!(s.evaluate(x), expect, max_relative = 1e-12);
            }
            assert!(s.max_imag_on(&[0.0, 0.5, 1.0]) < 1e-12);
        }
    }

    #[test]
    fn mean_iterations_k1_closed_form() {
        // T(x) = n (a - x) + 1.
        let s = spectral_t(25, 1, 2.0).unwrap();
        for &x in &[0.0, 1.0, 1.7, 2.0] {
            assert_relative_eq!(s.evaluate(x), 25.0 * (2.0 - x) + 1.0, max_relative = 1e-13);
        }
        assert_eq!(s.slope, 25.0);
        assert_eq!(s.constant, 1.0);
    }

    #[test]
    fn mean_iterations_k2_hand_solution() {
        // Matching the affine-plus-exponential ansatz inside the functional
        // equation by hand gives, for k = 2:
        //   Delta = n(n-1)/(2n-1), alpha = 2n - 1,
        //   delta_2 = n(n-1)/(2n-1)^2, delta_1 = (3n^2 - 3n + 1)/(2n-1)^2.
        for n in [4u64, 10, 100] {
            let nf = n as f64;
            let s = spectral_t(n, 2, 1.0).unwrap();
            let denom = 2.0 * nf - 1.0;
            assert_relative_eq!(s.slope, nf * (nf - 1.0) / denom, max_relative = 1e-12);
            assert_relative_eq!(
                s.constant,
                (3.0 * nf * nf - 3.0 * nf + 1.0) / (denom * denom),
                max_relative = 1e-10
            );
            assert_eq!(s.weights.len(), 1);
            assert_relative_eq!(
                s.weights[0].re,
                nf * (nf - 1.0) / (denom * denom),
                max_relative = 1e-10
            );
            // Spot value at x = 0.
            let expect = s.slope + s.constant + s.weights[0].re * (-(denom)).exp();
            assert_relative_eq!(s.evaluate(0.0), expect, max_relative = 1e-12);
        }
    }

    #[test]
    fn boundary_values_hold_across_orders() {
        for (n, k) in [(5u64, 1u32), (8, 2), (10, 3), (12, 4), (30, 6)] {
            let v = spectral_v(n, k, 1.0).unwrap();
            assert!((v.evaluate(1.0) - 1.0).abs() < 1e-9);
            let t = spectral_t(n, k, 1.0).unwrap();
            assert!((t.evaluate(1.0) - 1.0).abs() < 1e-9);
            let xs: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
            assert!(v.max_imag_on(&xs) < 1e-9, "(n,k)=({n},{k})");
            assert!(t.max_imag_on(&xs) < 1e-9, "(n,k)=({n},{k})");
        }
    }

    #[test]
    fn second_moment_exceeds_squared_probability() {
        // v(x) >= P(x)^2 with equality only in degenerate limits.
        for (n, k) in [(5u64, 1u32), (10, 3), (12, 4)] {
            let v = spectral_v(n, k, 1.0).unwrap();
            for &x in &[0.0f64, 0.4, 0.8] {
                let p2 = (2.0 * (x - 1.0)).exp();
                assert!(v.evaluate(x) > p2, "(n,k)=({n},{k}), x={x}");
            }
        }
    }

    #[test]
    fn slope_exact_is_rational_reciprocal() {
        let t = spectral_t(10, 2, 1.0).unwrap();
        let exact = t.slope_exact.unwrap();
        assert_eq!(exact, BigRational::new(BigInt::from(90), BigInt::from(19)));
    }
}
