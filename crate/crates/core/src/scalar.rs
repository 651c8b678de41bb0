//! Scalar abstraction: every numerical stage of the toolkit is generic over the
//! working precision, instantiated for `f32` and `f64`.

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

/// Floating-point scalar used throughout the pipeline.
///
/// The bound collects what the numerics need: IEEE float behaviour, mathematical
/// constants, conversion from literals, FFT support and thread safety. It is
/// sealed in practice to `f32` and `f64` through the two impls below.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Sum
    + Send
    + Sync
    + Debug
    + Display
    + LowerExp
    + rustfft::FftNum
    + 'static
{
    /// Converts the scalar into `f64` (exact for both supported precisions).
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

/// Converts an `f64` value (typically a literal or configuration entry) into the
/// working precision.
#[inline]
pub fn cast<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("finite f64 representable in working precision")
}
