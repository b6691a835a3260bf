//! Characteristic roots of the moment equations.
//!
//! Both equations have the product form
//!
//! ```text
//!     P(t) = (n - t)(n - 1 - t) ... (n - k + 1 - t) / (n (n-1) ... (n-k+1)) = rhs,
//! ```
//!
//! rhs = (1 - k/n)^2 for the second moment and rhs = 1 for the iteration
//! count. Roots are found on the scaled variable s = t/n (they sit on an
//! O(1) circle there) via the companion matrix of the expanded polynomial,
//! then polished by complex Newton on the product form itself, which is
//! cheap and immune to coefficient-expansion roundoff.
//!
//! Exactly known structure is handled specially: the iteration-count
//! equation always has the root 0 (deflated symbolically before the
//! eigenvalue call), and the second-moment equation has one distinguished
//! real root in [1, 2] (bracketed and bisected, then substituted for the
//! eigenvalue estimate it matches).

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::coeffs::MAX_K;
use super::OracleError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CharKind {
    /// rhs (1 - k/n)^2: exponents of the second-moment solution.
    Variance,
    /// rhs 1: exponents of the mean-iteration solution (0 is always one).
    Time,
}

fn rhs(n: u64, k: u32, kind: CharKind) -> f64 {
    match kind {
        CharKind::Variance => {
            let r = (n - u64::from(k)) as f64 / n as f64;
            r * r
        }
        CharKind::Time => 1.0,
    }
}

/// P(t) - rhs in complex arithmetic, stable product evaluation.
fn g(n: u64, k: u32, c: f64, t: Complex64) -> Complex64 {
    let mut p = Complex64::new(1.0, 0.0);
    for j in 0..u64::from(k) {
        let nj = (n - j) as f64;
        p *= (Complex64::new(nj, 0.0) - t) / nj;
    }
    p - c
}

/// d/dt of the product part: P(t) * sum_j (-1 / (n - j - t)).
fn g_prime(n: u64, k: u32, c: f64, t: Complex64) -> Complex64 {
    let p = g(n, k, c, t) + c;
    let mut s = Complex64::new(0.0, 0.0);
    for j in 0..u64::from(k) {
        s -= (Complex64::new((n - j) as f64, 0.0) - t).inv();
    }
    p * s
}

fn newton_polish(n: u64, k: u32, c: f64, mut t: Complex64) -> Complex64 {
    for _ in 0..50 {
        let f = g(n, k, c, t);
        let fp = g_prime(n, k, c, t);
        if fp.norm() < 1e-300 {
            break;
        }
        let step = f / fp;
        t -= step;
        if step.norm() <= 1e-15 * (1.0 + t.norm()) {
            break;
        }
    }
    t
}

/// Monic polynomial in s = t/n whose roots are the scaled characteristic
/// roots, constant term first: product_j (s - (1 - j/n)) - d.
fn scaled_poly(n: u64, k: u32, c: f64) -> Vec<f64> {
    let mut coeffs = vec![1.0f64];
    let mut d = if k.is_multiple_of(2) { c } else { -c };
    for j in 0..u64::from(k) {
        let b = 1.0 - j as f64 / n as f64;
        d *= b;
        let mut next = vec![0.0; coeffs.len() + 1];
        for (i, v) in coeffs.iter().enumerate() {
            next[i] -= b * v;
            next[i + 1] += v;
        }
        coeffs = next;
    }
    coeffs[0] -= d;
    coeffs
}

/// Eigenvalues of the companion matrix of a monic polynomial given with
/// constant term first (the leading 1 excluded from `low`).
fn companion_roots(low: &[f64]) -> Vec<Complex64> {
    let m = low.len();
    if m == 0 {
        return vec![];
    }
    let mat = DMatrix::<f64>::from_fn(m, m, |i, j| {
        if j == m - 1 {
            -low[i]
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    mat.complex_eigenvalues().iter().copied().collect()
}

/// Real bisection plus Newton for the distinguished second-moment root in
/// [1, 2], where P is strictly decreasing with P(1) = 1 - k/n > rhs > P(2).
///
/// Worked in logarithms: h(t) = sum_j ln1p(-t/(n - j)) - 2 ln1p(-k/n).
/// Near the root, P(t) - rhs is a difference of numbers close to 1 that
/// agree to O(1/n^2), so the direct form resolves the root only to about
/// n^2 eps; the log form has no such cancellation.
fn variance_principal_root(n: u64, k: u32) -> Result<f64, OracleError> {
    let h = |t: f64| -> f64 {
        let mut s = -2.0 * (-(u64::from(k) as f64) / n as f64).ln_1p();
        for j in 0..u64::from(k) {
            s += (-t / (n - j) as f64).ln_1p();
        }
        s
    };
    let h_prime = |t: f64| -> f64 {
        let mut s = 0.0;
        for j in 0..u64::from(k) {
            s -= 1.0 / ((n - j) as f64 - t);
        }
        s
    };
    let (mut lo, mut hi) = (1.0f64, 2.0f64);
    if !(h(lo) > 0.0 && h(hi) <= 0.0) {
        return Err(OracleError::NoBracket { lo, hi });
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-9 {
            break;
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..20 {
        let step = h(t) / h_prime(t);
        t -= step;
        if step.abs() <= f64::EPSILON * t {
            break;
        }
    }
    Ok(t)
}

/// All k characteristic roots (k - 1 plus the exact 0 for `Time`), sorted
/// by real part then imaginary part. Requires 1 <= k <= min(n - 1, 16).
pub fn char_roots(n: u64, k: u32, kind: CharKind) -> Result<Vec<Complex64>, OracleError> {
    if k < 1 || u64::from(k) >= n {
        return Err(OracleError::InvalidParameters(format!(
            "need 1 <= k <= n - 1, got n = {n}, k = {k}"
        )));
    }
    if k > MAX_K {
        return Err(OracleError::KTooLarge { k, cap: MAX_K });
    }
    let c = rhs(n, k, kind);
    let poly = scaled_poly(n, k, c);

    let mut roots: Vec<Complex64> = match kind {
        CharKind::Variance => companion_roots(&poly[..poly.len() - 1])
            .into_iter()
            .map(|s| newton_polish(n, k, c, s * n as f64))
            .collect(),
        CharKind::Time => {
            // Constant term vanishes identically (0 is a root); deflate by
            // dropping it, which is exact.
            debug_assert_eq!(poly[0], 0.0);
            let mut r: Vec<Complex64> = companion_roots(&poly[1..poly.len() - 1])
                .into_iter()
                .map(|s| newton_polish(n, k, c, s * n as f64))
                .collect();
            r.push(Complex64::new(0.0, 0.0));
            r
        }
    };

    if kind == CharKind::Variance {
        // Substitute the bisected value for whichever eigenvalue estimate
        // landed nearest; bisection plus Newton is the accuracy anchor.
        let beta = variance_principal_root(n, k)?;
        let target = Complex64::new(beta, 0.0);
        let nearest = (0..roots.len())
            .min_by(|&i, &j| {
                (roots[i] - target)
                    .norm()
                    .partial_cmp(&(roots[j] - target).norm())
                    .unwrap()
            })
            .expect("k >= 1 roots");
        roots[nearest] = target;
    }

    roots.sort_by(|a, b| (a.re, a.im).partial_cmp(&(b.re, b.im)).unwrap());

    let mut min_dist = f64::INFINITY;
    for i in 0..roots.len() {
        for j in i + 1..roots.len() {
            min_dist = min_dist.min((roots[i] - roots[j]).norm());
        }
    }
    if min_dist <= 1e-8 {
        return Err(OracleError::NearDegenerateRoots { min_dist });
    }
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn variance_k1_is_2_minus_1_over_n() {
        for n in [2u64, 10, 100, 1000, 10_000] {
            let roots = char_roots(n, 1, CharKind::Variance).unwrap();
            assert_eq!(roots.len(), 1);
            assert!((roots[0].re - (2.0 - 1.0 / n as f64)).abs() < 1e-13);
            assert_eq!(roots[0].im, 0.0);
        }
    }

    #[test]
    fn time_k1_is_zero() {
        let roots = char_roots(10, 1, CharKind::Time).unwrap();
        assert_eq!(roots, vec![Complex64::new(0.0, 0.0)]);
    }

    #[test]
    fn time_k2_exact_pair() {
        for n in [3u64, 10, 100, 1000] {
            let roots = char_roots(n, 2, CharKind::Time).unwrap();
            assert_eq!(roots.len(), 2);
            assert_relative_eq!(roots[0].re, 0.0, epsilon = 1e-12);
            assert_relative_eq!(roots[1].re, 2.0 * n as f64 - 1.0, max_relative = 1e-12);
            assert!(roots[1].im.abs() < 1e-9);
        }
    }

    #[test]
    fn variance_k2_reference_values() {
        // Quadratic case solved by hand for n = 100:
        // t^2 - 199 t + 9900 (1 - 0.9604) = 0.
        let roots = char_roots(100, 2, CharKind::Variance).unwrap();
        assert_relative_eq!(roots[0].re, 1.9899492, epsilon = 1e-6);
        assert_relative_eq!(roots[1].re, 197.0100508, epsilon = 1e-5);
    }

    #[test]
    fn roots_satisfy_the_equation() {
        for (n, k) in [(10u64, 3u32), (50, 5), (2000, 2), (100, 8)] {
            for kind in [CharKind::Variance, CharKind::Time] {
                let c = rhs(n, k, kind);
                for root in char_roots(n, k, kind).unwrap() {
                    let res = g(n, k, c, root).norm();
                    assert!(res < 1e-10, "(n,k)=({n},{k}) {kind:?}: residual {res:.2e}");
                }
            }
        }
    }

    #[test]
    fn principal_root_lies_in_unit_window() {
        for n in [10u64, 100, 1000] {
            for k in [1u32, 2, 3, 5] {
                if u64::from(k) >= n {
                    continue;
                }
                let roots = char_roots(n, k, CharKind::Variance).unwrap();
                let beta = roots[0];
                assert!(beta.im == 0.0 && (1.0..=2.0).contains(&beta.re));
                // All other roots live at real part of order n.
                for other in &roots[1..] {
                    assert!(other.re > beta.re + 1.0);
                }
            }
        }
    }

    #[test]
    fn complex_roots_come_in_conjugate_pairs() {
        let roots = char_roots(40, 5, CharKind::Variance).unwrap();
        for r in &roots {
            if r.im.abs() > 1e-9 {
                let conj_present = roots.iter().any(|s| (s - r.conj()).norm() < 1e-6);
                assert!(conj_present, "no conjugate for {r}");
            }
        }
    }

    #[test]
    fn parameter_validation() {
        assert!(char_roots(5, 0, CharKind::Time).is_err());
        assert!(char_roots(5, 5, CharKind::Time).is_err());
        assert!(matches!(
            char_roots(100, 17, CharKind::Variance),
            Err(OracleError::KTooLarge { .. })
        ));
    }
}
