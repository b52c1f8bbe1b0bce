//! Scalar abstraction shared by every model in the crate.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating point scalar the state algebra, detection models and fits
/// are written against. Implemented for `f32` and `f64`.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Tolerance used by physicality checks and rank decisions that depend
    /// on the working precision.
    fn physicality_tolerance() -> Self;

    /// Lossless-enough conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn frac_1_sqrt_2() -> Self {
        Self::lit(std::f64::consts::FRAC_1_SQRT_2)
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    #[inline]
    fn physicality_tolerance() -> Self {
        1e-9
    }
}

impl Real for f32 {
    #[inline]
    fn physicality_tolerance() -> Self {
        1e-4
    }
}
