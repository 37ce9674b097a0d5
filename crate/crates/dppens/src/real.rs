//! Scalar abstraction for the numeric core.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar the whole crate is generic over: `f32` or `f64`.
///
/// `RealField` supplies field arithmetic and elementary functions,
/// `ToPrimitive`/`FromPrimitive` the lossless bridges to `f64` used for
/// random-number decisions and reporting. `Send + Sync` lets verifier and
/// ensemble code fan work out across threads without per-call-site bounds.
pub trait Real: RealField + Copy + ToPrimitive + FromPrimitive + Send + Sync {}

impl<T> Real for T where T: RealField + Copy + ToPrimitive + FromPrimitive + Send + Sync {}

/// Shorthand for building a `T` constant from an `f64` literal.
#[inline]
pub fn real<T: Real>(x: f64) -> T {
    nalgebra::convert(x)
}

/// Finite-value check that works for any [`Real`].
#[inline]
pub fn is_finite<T: Real>(x: T) -> bool {
    x.to_f64().is_some_and(f64::is_finite)
}
