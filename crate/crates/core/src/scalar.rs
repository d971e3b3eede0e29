//! Scalar abstraction shared by every numeric routine in the crate.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};

/// Floating-point scalar the possibility calculus is written against.
///
/// Implemented for `f32` and `f64`. Log-credibilities, covariances and
/// annealing powers are all carried in this type.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    fn inf() -> Self;

    fn neg_inf() -> Self;

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Machine epsilon.
    fn eps() -> Self;
}

impl Real for f32 {
    fn inf() -> Self {
        f32::INFINITY
    }
    fn neg_inf() -> Self {
        f32::NEG_INFINITY
    }
    fn eps() -> Self {
        f32::EPSILON
    }
}

impl Real for f64 {
    fn inf() -> Self {
        f64::INFINITY
    }
    fn neg_inf() -> Self {
        f64::NEG_INFINITY
    }
    fn eps() -> Self {
        f64::EPSILON
    }
}
