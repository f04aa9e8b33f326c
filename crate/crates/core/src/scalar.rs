//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All model, federation and analysis code is written against [`Scalar`]
//! so it runs unchanged in `f32` or `f64`. The crate-level aliases pick
//! `f64`, which is what the diagnostics are calibrated for.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar usable with the dense linear algebra backend.
pub trait Scalar:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Send + Sync + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Converts a count into `T`.
#[inline]
pub fn count<T: Scalar>(n: usize) -> T {
    T::from_usize(n).expect("count representable in scalar type")
}

/// Widens `T` to `f64` for reporting.
#[inline]
pub fn to_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}
