//! One-dimensional laws driving the splitting algorithm.
//!
//! A [`RandomModel`] is a law on [0, inf) with closed-form cdf, quantile and
//! integrated hazard Lambda(y) = -ln(1 - F(y)). Conditional sampling above a
//! level x goes through the hazard scale,
//!
//! ```text
//!     X = Lambda^-1( Lambda(x) + E ),    E standard exponential,
//! ```
//!
//! which costs exactly one uniform per draw. That discipline is what lets
//! two runs on hazard-equivalent models consume identical uniform streams,
//! so the equivalence check in `stats` can demand bit-identical outcomes.
//!
//! The committor toy is the one law with an atom: conditional draws cap at
//! the target and [`tilde_transform`] smears the atom over (1, inf) with a
//! second uniform, restoring a continuous law (a Pareto tail) without
//! changing the probability of hitting the target.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::real::{real, Real};
use crate::rng::CounterRng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    /// Conditioning event {X > x} has probability zero.
    #[error("conditioning level {x} has zero survival probability")]
    DegenerateConditioning { x: f64 },
    /// cdf(y) = 1, so the integrated hazard at y is +inf.
    #[error("integrated hazard is infinite at {y} (cdf saturates)")]
    InfiniteHazard { y: f64 },
    #[error("uniform variate {u} outside the open interval (0, 1)")]
    InvalidUniform { u: f64 },
    #[error("levels out of order: x = {x} > y = {y}")]
    InvalidLevelOrder { x: f64, y: f64 },
    #[error("unknown model key {key:?} (expected exponential, pareto, weibull or committor)")]
    UnknownModel { key: String },
    #[error("invalid model parameters: {what}")]
    InvalidParameter { what: String },
}

fn as_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// A continuous law on [0, inf) with closed-form hazard scale.
///
/// `lambda` / `lambda_inv` must be exact inverses on the support and
/// strictly increasing; every provided sampler relies on that.
pub trait RandomModel<T: Real> {
    fn cdf(&self, y: T) -> T;
    /// 1 - cdf(y), overridden wherever a direct form avoids cancellation.
    fn survival(&self, y: T) -> T {
        T::one() - self.cdf(y)
    }
    fn pdf(&self, y: T) -> T;
    /// Generalized inverse of the cdf on (0, 1).
    fn quantile(&self, p: T) -> T;
    /// Integrated hazard Lambda(y) = -ln(1 - cdf(y)); 0 below the support.
    fn lambda(&self, y: T) -> T;
    /// Inverse of `lambda` on [0, inf).
    fn lambda_inv(&self, s: T) -> T;

    /// Level at which the law carries an atom, if any. The splitting driver
    /// only accepts such a model when the run targets exactly that level.
    fn atom_level(&self) -> Option<T> {
        None
    }

    /// Whether `sample_above` is the plain one-uniform quantile transform.
    /// The bit-exactness equivalence check only applies to such models.
    fn is_inverse_cdf(&self) -> bool {
        true
    }

    /// One draw from L(X | X > x). Inverse-cdf models consume exactly one
    /// uniform. Requires survival(x) > 0.
    fn sample_above(&self, x: T, rng: &mut CounterRng) -> T {
        let u = real::<T>(rng.next_uniform());
        // -ln(1 - u) is a standard exponential; shift on the hazard scale.
        self.lambda_inv(self.lambda(x) - (-u).ln_1p())
    }
}

// ---------------------------------------------------------------------------
// Catalog laws
// ---------------------------------------------------------------------------

/// Unit-rate exponential: F(y) = 1 - e^(-y). Its hazard scale is the
/// identity, which makes it the reference model for equivalence checks.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Exponential;

impl<T: Real> RandomModel<T> for Exponential {
    fn cdf(&self, y: T) -> T {
        if y <= T::zero() {
            T::zero()
        } else {
            -(-y).exp_m1()
        }
    }
    fn survival(&self, y: T) -> T {
        if y <= T::zero() {
            T::one()
        } else {
            (-y).exp()
        }
    }
    fn pdf(&self, y: T) -> T {
        if y < T::zero() {
            T::zero()
        } else {
            (-y).exp()
        }
    }
    fn quantile(&self, p: T) -> T {
        -(-p).ln_1p()
    }
    fn lambda(&self, y: T) -> T {
        y.max(T::zero())
    }
    fn lambda_inv(&self, s: T) -> T {
        s
    }
}

/// Polynomial tail: F(y) = 1 - (1 + y)^(-alpha) on [0, inf).
/// Hazard scale Lambda(y) = alpha ln(1 + y).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pareto<T> {
    pub alpha: T,
}

impl<T: Real> Pareto<T> {
    pub fn new(alpha: T) -> Result<Self, ModelError> {
        if alpha > T::zero() && alpha.is_finite() {
            Ok(Pareto { alpha })
        } else {
            Err(ModelError::InvalidParameter {
                what: format!("pareto exponent must be positive and finite, got {alpha}"),
            })
        }
    }
}

impl<T: Real> RandomModel<T> for Pareto<T> {
    fn cdf(&self, y: T) -> T {
        if y <= T::zero() {
            T::zero()
        } else {
            -(-self.alpha * y.ln_1p()).exp_m1()
        }
    }
    fn survival(&self, y: T) -> T {
        if y <= T::zero() {
            T::one()
        } else {
            (-self.alpha * y.ln_1p()).exp()
        }
    }
    fn pdf(&self, y: T) -> T {
        if y < T::zero() {
            T::zero()
        } else {
            self.alpha * (-(self.alpha + T::one()) * y.ln_1p()).exp()
        }
    }
    fn quantile(&self, p: T) -> T {
        (-(-p).ln_1p() / self.alpha).exp_m1()
    }
    fn lambda(&self, y: T) -> T {
        if y <= T::zero() {
            T::zero()
        } else {
            self.alpha * y.ln_1p()
        }
    }
    fn lambda_inv(&self, s: T) -> T {
        (s / self.alpha).exp_m1()
    }
}

/// Stretched-exponential tail: F(y) = 1 - e^(-y^shape) on [0, inf).
/// Hazard scale Lambda(y) = y^shape.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Weibull<T> {
    pub shape: T,
}

impl<T: Real> Weibull<T> {
    pub fn new(shape: T) -> Result<Self, ModelError> {
        if shape > T::zero() && shape.is_finite() {
            Ok(Weibull { shape })
        } else {
            Err(ModelError::InvalidParameter {
                what: format!("weibull shape must be positive and finite, got {shape}"),
            })
        }
    }
}

impl<T: Real> RandomModel<T> for Weibull<T> {
    fn cdf(&self, y: T) -> T {
        if y <= T::zero() {
            T::zero()
        } else {
            -(-y.powf(self.shape)).exp_m1()
        }
    }
    fn survival(&self, y: T) -> T {
        if y <= T::zero() {
            T::one()
        } else {
            (-y.powf(self.shape)).exp()
        }
    }
    fn pdf(&self, y: T) -> T {
        if y <= T::zero() {
            T::zero()
        } else {
            self.shape * y.powf(self.shape - T::one()) * (-y.powf(self.shape)).exp()
        }
    }
    fn quantile(&self, p: T) -> T {
        (-(-p).ln_1p()).powf(T::one() / self.shape)
    }
    fn lambda(&self, y: T) -> T {
        if y <= T::zero() {
            T::zero()
        } else {
            y.powf(self.shape)
        }
    }
    fn lambda_inv(&self, s: T) -> T {
        s.powf(T::one() / self.shape)
    }
}

/// Toy committor law: survival xi0 / z on [xi0, 1) and an atom of mass xi0
/// at 1, the target. Raw conditional draws above z cap at 1; composing them
/// with [`tilde_transform`] at a = 1 yields exactly the Pareto tail
/// F(t) = 1 - xi0 / t on [xi0, inf), which is what the `RandomModel`
/// methods below describe.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CommittorToy<T> {
    pub xi0: T,
}

impl<T: Real> CommittorToy<T> {
    pub fn new(xi0: T) -> Result<Self, ModelError> {
        if xi0 > T::zero() && xi0 < T::one() {
            Ok(CommittorToy { xi0 })
        } else {
            Err(ModelError::InvalidParameter {
                what: format!("committor xi0 must lie in (0, 1), got {xi0}"),
            })
        }
    }

    /// One draw from the raw conditional law L(X | X > z) given a uniform
    /// v in (0, 1): min(max(z, xi0) / v, 1). The atom at 1 receives
    /// conditional mass max(z, xi0) when z < 1.
    pub fn sample_conditional_raw(&self, z: T, v: T) -> T {
        (z.max(self.xi0) / v).min(T::one())
    }

    /// Raw survival P(X > z): has the jump at the target.
    pub fn survival_raw(&self, z: T) -> T {
        if z < self.xi0 {
            T::one()
        } else if z < T::one() {
            self.xi0 / z
        } else {
            T::zero()
        }
    }

    /// Mass of the atom at the target.
    pub fn atom_mass(&self) -> T {
        self.xi0
    }
}

impl<T: Real> RandomModel<T> for CommittorToy<T> {
    fn cdf(&self, t: T) -> T {
        if t <= self.xi0 {
            T::zero()
        } else {
            T::one() - self.xi0 / t
        }
    }
    fn survival(&self, t: T) -> T {
        (self.xi0 / t).min(T::one())
    }
    fn pdf(&self, t: T) -> T {
        if t < self.xi0 {
            T::zero()
        } else {
            self.xi0 / (t * t)
        }
    }
    fn quantile(&self, p: T) -> T {
        self.xi0 / (T::one() - p)
    }
    fn lambda(&self, t: T) -> T {
        if t <= self.xi0 {
            T::zero()
        } else {
            (t / self.xi0).ln()
        }
    }
    fn lambda_inv(&self, s: T) -> T {
        self.xi0 * s.exp()
    }
    fn atom_level(&self) -> Option<T> {
        Some(T::one())
    }
    fn is_inverse_cdf(&self) -> bool {
        false
    }
    /// Raw capped draw, then the atom is smeared above 1. Two uniforms.
    fn sample_above(&self, x: T, rng: &mut CounterRng) -> T {
        let v = real::<T>(rng.next_uniform());
        let raw = self.sample_conditional_raw(x, v);
        let u = real::<T>(rng.next_uniform());
        if raw < T::one() {
            raw
        } else {
            T::one() / u
        }
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Conditional cdf F(y; x) = P(X <= y | X > x). Zero for y <= x.
pub fn cdf_conditional<T: Real, M: RandomModel<T> + ?Sized>(
    model: &M,
    y: T,
    x: T,
) -> Result<T, ModelError> {
    if model.survival(x) <= T::zero() {
        return Err(ModelError::DegenerateConditioning { x: as_f64(x) });
    }
    if y <= x {
        return Ok(T::zero());
    }
    // 1 - exp(-(Lambda(y) - Lambda(x))), stable for both tiny and large gaps.
    Ok(-(-(model.lambda(y) - model.lambda(x))).exp_m1())
}

/// Hazard gap Lambda(y) - Lambda(x) for x <= y. Infinite hazard (cdf(y) = 1)
/// is reported as an error rather than folded into the arithmetic.
pub fn lambda_between<T: Real, M: RandomModel<T> + ?Sized>(
    model: &M,
    y: T,
    x: T,
) -> Result<T, ModelError> {
    if x > y {
        return Err(ModelError::InvalidLevelOrder {
            x: as_f64(x),
            y: as_f64(y),
        });
    }
    if model.survival(y) <= T::zero() {
        return Err(ModelError::InfiniteHazard { y: as_f64(y) });
    }
    Ok((model.lambda(y) - model.lambda(x)).max(T::zero()))
}

/// Quantile transform for the conditional law: maps a uniform u in (0, 1)
/// to Lambda^-1(Lambda(x) + E(u)) where E(u) = -ln(1 - u).
pub fn sample_conditional<T: Real, M: RandomModel<T> + ?Sized>(
    model: &M,
    x: T,
    u: T,
) -> Result<T, ModelError> {
    if !(u > T::zero() && u < T::one()) {
        return Err(ModelError::InvalidUniform { u: as_f64(u) });
    }
    if model.survival(x) <= T::zero() {
        return Err(ModelError::DegenerateConditioning { x: as_f64(x) });
    }
    Ok(model.lambda_inv(model.lambda(x) - (-u).ln_1p()))
}

/// Atom-smearing map: values below a pass through, values at or above a are
/// replaced by a / u, which lands in (a, inf). Applied to a law whose only
/// mass at or above a sits exactly at a, it restores a continuous cdf while
/// preserving the probability of {X >= a}.
pub fn tilde_transform<T: Real>(x_val: T, u: T, a: T) -> Result<T, ModelError> {
    if !(u > T::zero() && u < T::one()) {
        return Err(ModelError::InvalidUniform { u: as_f64(u) });
    }
    if x_val < a {
        Ok(x_val)
    } else {
        Ok(a / u)
    }
}

// ---------------------------------------------------------------------------
// Catalog dispatch
// ---------------------------------------------------------------------------

/// Model selection as it appears in experiment configs: a string key plus
/// positional parameters. Defaults: pareto exponent 2, weibull shape 2;
/// committor requires xi0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub key: String,
    #[serde(default)]
    pub params: Vec<f64>,
}

impl ModelSpec {
    pub fn new(key: &str, params: &[f64]) -> Self {
        ModelSpec {
            key: key.to_string(),
            params: params.to_vec(),
        }
    }

    pub fn exponential() -> Self {
        Self::new("exponential", &[])
    }

    pub fn build<T: Real>(&self) -> Result<ModelKind<T>, ModelError> {
        let wrong_arity = |expected: &str| ModelError::InvalidParameter {
            what: format!(
                "model {:?} takes {expected}, got {} parameter(s)",
                self.key,
                self.params.len()
            ),
        };
        match self.key.as_str() {
            "exponential" => match self.params.len() {
                0 => Ok(ModelKind::Exponential(Exponential)),
                _ => Err(wrong_arity("no parameters")),
            },
            "pareto" => match self.params.len() {
                0 => Ok(ModelKind::Pareto(Pareto::new(real(2.0))?)),
                1 => Ok(ModelKind::Pareto(Pareto::new(real(self.params[0]))?)),
                _ => Err(wrong_arity("at most one parameter (exponent)")),
            },
            "weibull" => match self.params.len() {
                0 => Ok(ModelKind::Weibull(Weibull::new(real(2.0))?)),
                1 => Ok(ModelKind::Weibull(Weibull::new(real(self.params[0]))?)),
                _ => Err(wrong_arity("at most one parameter (shape)")),
            },
            "committor" => match self.params.len() {
                1 => Ok(ModelKind::Committor(CommittorToy::new(real(
                    self.params[0],
                ))?)),
                _ => Err(wrong_arity("exactly one parameter (xi0)")),
            },
            _ => Err(ModelError::UnknownModel {
                key: self.key.clone(),
            }),
        }
    }
}

/// Closed enum over the catalog, so configs can be run without boxing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModelKind<T> {
    Exponential(Exponential),
    Pareto(Pareto<T>),
    Weibull(Weibull<T>),
    Committor(CommittorToy<T>),
}

macro_rules! dispatch {
    ($self:ident, $m:ident, $body:expr) => {
        match $self {
            ModelKind::Exponential($m) => $body,
            ModelKind::Pareto($m) => $body,
            ModelKind::Weibull($m) => $body,
            ModelKind::Committor($m) => $body,
        }
    };
}

impl<T: Real> RandomModel<T> for ModelKind<T> {
    fn cdf(&self, y: T) -> T {
        dispatch!(self, m, m.cdf(y))
    }
    fn survival(&self, y: T) -> T {
        dispatch!(self, m, m.survival(y))
    }
    fn pdf(&self, y: T) -> T {
        dispatch!(self, m, m.pdf(y))
    }
    fn quantile(&self, p: T) -> T {
        dispatch!(self, m, m.quantile(p))
    }
    fn lambda(&self, y: T) -> T {
        dispatch!(self, m, m.lambda(y))
    }
    fn lambda_inv(&self, s: T) -> T {
        dispatch!(self, m, m.lambda_inv(s))
    }
    fn atom_level(&self) -> Option<T> {
        dispatch!(self, m, m.atom_level())
    }
    fn is_inverse_cdf(&self) -> bool {
        // Qualified form: the receiver alone does not pin T for the
        // scalar-generic Exponential impl.
        dispatch!(self, m, RandomModel::<T>::is_inverse_cdf(m))
    }
    fn sample_above(&self, x: T, rng: &mut CounterRng) -> T {
        dispatch!(self, m, m.sample_above(x, rng))
    }
}
