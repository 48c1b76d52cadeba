//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! Floating-point code is written against [`Scalar`], which `f32` and `f64`
//! implement. Identities that only hold exactly (the sequence cubes and the
//! sextic eigen-identity of the expansion table) are written against
//! [`Ring`], which `f64` and [`crate::Exact`] both satisfy.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, Num, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Numeric literal conversion.
#[inline]
pub fn lit<T: Scalar>(v: f64) -> T {
    T::from_f64(v).expect("literal representable in scalar type")
}

/// Lossy conversion to `f64`, used for error messages and reports.
#[inline]
pub fn to_f64<T: Scalar>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// Commutative ring with exact integer embedding; division is only used by
/// nonzero coefficients.
pub trait Ring: Clone + Num + FromPrimitive + Debug {}

impl<T: Clone + Num + FromPrimitive + Debug> Ring for T {}

/// Sign-preserving real n-th root. `n` must be odd for negative `t`.
pub fn real_root<T: Scalar>(t: T, n: u32) -> T {
    match n {
        1 => t,
        3 => t.cbrt(),
        _ => {
            let r = t.abs().powf(T::one() / T::from_u32(n).unwrap());
            if t < T::zero() {
                -r
            } else {
                r
            }
        }
    }
}

/// Relative difference `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_diff<T: Scalar>(a: T, b: T, floor: T) -> T {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_root_examples() {
        assert_eq!(real_root(8.0_f64, 3), 2.0);
        assert!((real_root(-7.0_f64, 3) + 1.912_931_183).abs() < 1e-9);
        assert_eq!(real_root(0.0_f64, 3), 0.0);
        assert!((real_root(-32.0_f64, 5) + 2.0).abs() < 1e-15);
        assert!((real_root(-8.0_f32, 3) + 2.0).abs() < 1e-6);
    }

    #[test]
    fn real_root_inverts_odd_powers() {
        for n in [3_u32, 5, 7] {
            let mut t = -1000.0_f64;
            while t <= 1000.0 {
                let back = real_root(t.powi(n as i32), n);
                assert!((back - t).abs() <= 4.0 * f64::EPSILON * t.abs().max(1e-300), "n={n} t={t} back={back}");
                t += 7.37;
            }
        }
    }
}
