//! Scalar abstraction shared by every numerical module.
//!
//! All estimation code is written once against [`Scalar`] and instantiated
//! with `f64` for simulation, `f32` where memory matters, and the
//! double-double [`twofloat::TwoFloat`] when time-stamp arithmetic needs more
//! than 53 bits (offsets of a few hundred nanoseconds riding on timestamps of
//! tens of milliseconds).

use std::fmt::{Debug, Display};
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar used throughout the crate.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal or sample into this scalar.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every scalar type")
    }

    /// Converts an index or count.
    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize is representable in every scalar type")
    }

    /// Nearest `f64`, used for reporting and for driving `f64` RNG code.
    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Unit roundoff of the representation.
    #[inline]
    fn eps() -> Self {
        Self::epsilon()
    }

    #[inline]
    fn two() -> Self {
        Self::one() + Self::one()
    }

    #[inline]
    fn half() -> Self {
        Self::one() / Self::two()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
// `TwoFloat`'s `FromPrimitive::from_f64` returns zero and its `epsilon` is the
// smallest normal `f64`, so both are replaced here.
impl Scalar for twofloat::TwoFloat {
    #[inline]
    fn of(x: f64) -> Self {
        twofloat::TwoFloat::from(x)
    }

    #[inline]
    fn eps() -> Self {
        twofloat::TwoFloat::from(f64::EPSILON * f64::EPSILON)
    }
}

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle<S: Scalar>(x: S) -> S {
    let two_pi = S::TAU();
    let mut y = x % two_pi;
    if y <= -S::PI() {
        y += two_pi;
    } else if y > S::PI() {
        y -= two_pi;
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use twofloat::TwoFloat;

    #[test]
    fn wrap_angle_range() {
        for k in -20..=20 {
            let x = k as f64 * 0.7;
            let w = wrap_angle(x);
            assert!(w > -std::f64::consts::PI && w <= std::f64::consts::PI);
            let turns = (x - w) / std::f64::consts::TAU;
            assert!((turns - turns.round()).abs() < 1e-12);
        }
        assert_eq!(wrap_angle(std::f64::consts::PI), std::f64::consts::PI);
        assert_eq!(wrap_angle(-std::f64::consts::PI), std::f64::consts::PI);
    }

    #[test]
    fn twofloat_carries_extra_precision() {
        let big = TwoFloat::of(0.01);
        let tiny = TwoFloat::of(5e-7) / TwoFloat::of(3.0);
        let back = (big + tiny) - big;
        let rel = ((back - tiny) / tiny).abs().f64();
        assert!(rel < 1e-25, "relative error {rel}");
    }
}
