//! Scalar abstraction for the numeric core.
//!
//! Everything that touches particle levels, densities, or quadrature values
//! is generic over [`Real`], a small alias trait over `num-traits`. `f64` is
//! the working type of the harness and the CLI; `f32` compiles and runs at
//! reduced accuracy, which keeps the generic code honest. Exact integer and
//! rational arithmetic (coefficient tables, the level-spacing constant)
//! lives in `oracle` on top of `num-bigint` instead.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar used by the models, the order-statistic formulas,
/// the splitting driver and the quadrature oracle.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: Float + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
}

/// Conversion from `f64` literals and intermediates.
#[inline]
pub fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 value not representable in scalar type")
}

/// Conversion for counts and indices.
#[inline]
pub fn real_u64<T: Real>(n: u64) -> T {
    T::from_u64(n).expect("u64 value not representable in scalar type")
}
