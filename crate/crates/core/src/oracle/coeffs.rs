//! Exact integer tables behind the characteristic polynomials.
//!
//! Over the exponential law, repeated differentiation of the moment
//! functional equations turns them into constant-coefficient ODEs. The
//! integer data of that reduction is built here by a first-order recursion
//! in the differentiation stage l: eliminating the order-(l-1) kernel
//! introduces the factor n - k + l + 1, so
//!
//! ```text
//!     mu_0 = 1,            mu_(l+1) = -(n - k + l + 1) mu_l
//!     r_(0,1) = n - k + 1
//!     r_(0,l+1) = -(n - k + l + 1) r_(0,l)
//!     r_(m,l+1) = r_(m-1,l) - (n - k + l + 1) r_(m,l)      0 < m < l
//!     r_(l,l+1) = (n - k + l + 1) + r_(l-1,l)
//! ```
//!
//! After k stages, t^k - sum_m r_m t^m factors exactly as
//! (t - n)(t - (n-1)) ... (t - (n-k+1)), which is the verification the
//! acceptance suite runs coefficient by coefficient in BigInt arithmetic.
//! Everything is exact; floats only appear when `roots` consumes the table.

use num_bigint::BigInt;
use num_traits::One;

use super::OracleError;

/// Exact polynomials are cheap for small k but coefficients grow like n^k;
/// past this cap a float companion matrix would be meaningless anyway.
pub const MAX_K: u32 = 16;

/// Output of the stage recursion, all exact.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientTable {
    pub n: u64,
    pub k: u32,
    /// Alternating product (-1)^k n (n-1) ... (n-k+1).
    pub mu: BigInt,
    /// r[m] for m = 0..k-1: the lower coefficients of the characteristic
    /// polynomial t^k - sum r[m] t^m.
    pub r: Vec<BigInt>,
    /// mu after each stage, index 0..=k (index 0 is 1).
    pub mu_steps: Vec<BigInt>,
    /// r coefficients after each stage l = 1..=k (entry l-1 has length l).
    pub r_steps: Vec<Vec<BigInt>>,
}

impl CoefficientTable {
    /// Monic characteristic polynomial coefficients, constant term first:
    /// [-r_0, ..., -r_(k-1), 1].
    pub fn characteristic_poly(&self) -> Vec<BigInt> {
        let mut c: Vec<BigInt> = self.r.iter().map(|v| -v).collect();
        c.push(BigInt::one());
        c
    }
}

/// Run the stage recursion for 1 <= k <= min(n - 1, MAX_K).
pub fn recursion_coeffs(n: u64, k: u32) -> Result<CoefficientTable, OracleError> {
    if k < 1 || u64::from(k) >= n {
        return Err(OracleError::InvalidParameters(format!(
            "need 1 <= k <= n - 1, got n = {n}, k = {k}"
        )));
    }
    if k > MAX_K {
        return Err(OracleError::KTooLarge { k, cap: MAX_K });
    }
    let factor = |l: u32| BigInt::from(n - u64::from(k) + u64::from(l) + 1);

    let mut mu_steps = vec![BigInt::one()];
    let mut r: Vec<BigInt> = vec![factor(0)];
    let mut r_steps = vec![r.clone()];
    mu_steps.push(-factor(0));

    for l in 1..k {
        let f = factor(l);
        let mut next = vec![BigInt::from(0); (l + 1) as usize];
        next[0] = -&f * &r[0];
        for m in 1..l as usize {
            next[m] = &r[m - 1] - &f * &r[m];
        }
        next[l as usize] = &f + &r[(l - 1) as usize];
        mu_steps.push(-&f * mu_steps.last().unwrap());
        r = next;
        r_steps.push(r.clone());
    }

    Ok(CoefficientTable {
        n,
        k,
        mu: mu_steps.last().unwrap().clone(),
        r,
        mu_steps,
        r_steps,
    })
}

/// Expand (t - n)(t - (n-1)) ... (t - (n-k+1)) by convolution, constant
/// term first. Independent of the recursion; the identity tests compare
/// the two.
pub fn falling_product_poly(n: u64, k: u32) -> Vec<BigInt> {
    let mut coeffs = vec![BigInt::one()];
    for j in 0..u64::from(k) {
        let root = BigInt::from(n - j);
        let mut next = vec![BigInt::from(0); coeffs.len() + 1];
        for (i, c) in coeffs.iter().enumerate() {
            next[i] -= &root * c;
            next[i + 1] += c;
        }
        coeffs = next;
    }
    coeffs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(v: i64) -> BigInt {
        BigInt::from(v)
    }

    #[test]
    fn k1_table() {
        let t = recursion_coeffs(10, 1).unwrap();
        assert_eq!(t.mu, big(-10));
        assert_eq!(t.r, vec![big(10)]);
        assert_eq!(t.mu_steps, vec![big(1), big(-10)]);
    }

    #[test]
    fn k2_closed_forms() {
        for n in [3u64, 10, 50] {
            let t = recursion_coeffs(n, 2).unwrap();
            let nn = n as i64;
            assert_eq!(t.r[1], big(2 * nn - 1));
            assert_eq!(t.r[0], big(-nn * (nn - 1)));
            assert_eq!(t.mu, big(nn * (nn - 1)));
        }
    }

    #[test]
    fn k3_closed_forms() {
        for n in [4u64, 10, 31] {
            let t = recursion_coeffs(n, 3).unwrap();
            let nn = n as i64;
            assert_eq!(t.r[2], big(3 * nn - 3));
            assert_eq!(t.r[1], big(-3 * nn * nn + 6 * nn - 2));
            assert_eq!(t.r[0], big(nn * (nn - 1) * (nn - 2)));
            assert_eq!(t.mu, big(-nn * (nn - 1) * (nn - 2)));
        }
    }

    #[test]
    fn mu_is_alternating_falling_factorial() {
        for (n, k) in [(5u64, 4u32), (12, 7), (100, 9), (1000, 16)] {
            let t = recursion_coeffs(n, k).unwrap();
            let mut expect = BigInt::one();
            for j in 0..u64::from(k) {
                expect *= BigInt::from(n - j);
            }
            if k % 2 == 1 {
                expect = -expect;
            }
            assert_eq!(t.mu, expect, "(n,k)=({n},{k})");
            assert_eq!(t.r[0], -&t.mu);
        }
    }

    #[test]
    fn characteristic_poly_factors_exactly() {
        for (n, k) in [(4u64, 2u32), (9, 5), (20, 8), (50, 3), (1000, 6)] {
            let t = recursion_coeffs(n, k).unwrap();
            assert_eq!(
                t.characteristic_poly(),
                falling_product_poly(n, k),
                "(n,k)=({n},{k})"
            );
        }
    }

    #[test]
    fn stage_shapes() {
        let t = recursion_coeffs(9, 4).unwrap();
        assert_eq!(t.mu_steps.len(), 5);
        assert_eq!(t.r_steps.len(), 4);
        for (l, stage) in t.r_steps.iter().enumerate() {
            assert_eq!(stage.len(), l + 1);
        }
        assert_eq!(*t.r_steps.last().unwrap(), t.r);
    }

    #[test]
    fn parameter_validation() {
        assert!(matches!(
            recursion_coeffs(5, 0),
            Err(OracleError::InvalidParameters(_))
        ));
        assert!(matches!(
            recursion_coeffs(5, 5),
            Err(OracleError::InvalidParameters(_))
        ));
        assert!(matches!(
            recursion_coeffs(100, 17),
            Err(OracleError::KTooLarge { cap: 16, .. })
        ));
    }
}
