//! Scalar abstraction shared by the geometry, dynamics and dense linear algebra.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// A real floating point scalar (`f32` or `f64`).
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Default + Debug + Display + Sum + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn two() -> Self {
        Self::one() + Self::one()
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Wrap an angle into `[0, 2π)`.
pub fn wrap_angle<T: Real>(theta: T) -> T {
    let tau = T::TAU();
    let mut r = theta % tau;
    if r < T::zero() {
        r = r + tau;
    }
    // `x % tau` can round up to exactly tau for tiny negative inputs.
    if r >= tau {
        r = r - tau;
    }
    r
}

/// Signed angular difference `a - b` wrapped into `(-π, π]`.
pub fn angle_diff<T: Real>(a: T, b: T) -> T {
    let pi = T::PI();
    let mut d = wrap_angle(a - b);
    if d > pi {
        d = d - T::TAU();
    }
    d
}
