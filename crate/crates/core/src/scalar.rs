//! Scalar abstraction shared by the geometry code.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, NumCast};

/// Floating point type the geometry is generic over. Implemented for
/// [`f32`] and [`f64`]; the pipeline uses `f64` throughout.
pub trait Scalar:
    Float + FloatConst + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as NumCast>::from(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_usize(v: usize) -> Self {
        <Self as NumCast>::from(v).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Wraps a bearing into `[0, 360)`.
#[inline]
pub fn normalize_degrees<T: Scalar>(deg: T) -> T {
    let full = T::lit(360.0);
    let r = deg % full;
    let r = if r < T::zero() { r + full } else { r };
    // `-1e-17 + 360` rounds to 360
    if r >= full {
        T::zero()
    } else {
        r
    }
}

/// Wraps an angle into `(-180, 180]`.
#[inline]
pub fn signed_degrees<T: Scalar>(deg: T) -> T {
    let r = normalize_degrees(deg);
    if r > T::lit(180.0) {
        r - T::lit(360.0)
    } else {
        r
    }
}
