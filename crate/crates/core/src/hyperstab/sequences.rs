use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, real_root, Ring, Scalar};

/// `u = m / ⁿ√a`, `v = ⁿ√((1 − mⁿ)/b)`, `w = ⁿ√(2mⁿ − 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Sequences<T> {
    pub u: T,
    pub v: T,
    pub w: T,
}

/// The cube-root sequences (`n = 3`).
pub fn sequences<T: Scalar>(a: T, b: T, m: u32) -> Result<Sequences<T>> {
    sequences_n(a, b, m, 3)
}

/// The sequences for an odd root degree `n`.
pub fn sequences_n<T: Scalar>(a: T, b: T, m: u32, n: u32) -> Result<Sequences<T>> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!("m must be at least 2, got {m}")));
    }
    if a.is_zero() || b.is_zero() {
        return Err(Error::InvalidParameter("a and b must be nonzero".into()));
    }
    let mn: T = lit::<T>(m as f64).powi(n as i32);
    Ok(Sequences {
        u: lit::<T>(m as f64) / real_root(a, n),
        v: real_root((T::one() - mn) / b, n),
        w: real_root(lit::<T>(2.0) * mn - T::one(), n),
    })
}

/// `(uⁿ, vⁿ, wⁿ) = (mⁿ/a, (1 − mⁿ)/b, 2mⁿ − 1)`, computed without roots so
/// that exact rings give exact values.
pub fn cube_sequences<F: Ring>(a: &F, b: &F, m: u32, n: u32) -> (F, F, F) {
    let mut mn = F::one();
    let mf = F::from_u32(m).expect("integer embeds");
    for _ in 0..n {
        mn = mn * mf.clone();
    }
    let u = mn.clone() / a.clone();
    let v = (F::one() - mn.clone()) / b.clone();
    let w = mn.clone() + mn - F::one();
    (u, v, w)
}

/// `(a U + b V − 1, a U − b V − W)` for the cube sequences; both vanish.
pub fn cube_identity_defects<F: Ring>(a: &F, b: &F, m: u32, n: u32) -> (F, F) {
    let (u, v, w) = cube_sequences(a, b, m, n);
    let au = a.clone() * u;
    let bv = b.clone() * v;
    (au.clone() + bv.clone() - F::one(), au - bv - w)
}

/// `c U² + d V² − W² − 1` with `c = 2a²`, `d = 2b²`; vanishes identically.
pub fn sextic_defect<F: Ring>(a: &F, b: &F, m: u32, n: u32) -> F {
    let (u, v, w) = cube_sequences(a, b, m, n);
    let two = F::one() + F::one();
    let c = two.clone() * a.clone() * a.clone();
    let d = two * b.clone() * b.clone();
    c * u.clone() * u + d * v.clone() * v - w.clone() * w - F::one()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Exact;
    use num_traits::Zero;

    #[test]
    fn sequences_example() {
        let s = sequences(1.0f64, 1.0, 2).unwrap();
        assert_eq!(s.u, 2.0);
        assert!((s.v + 1.912_931_183).abs() < 1e-9);
        assert!((s.w - 2.466_212_074).abs() < 1e-9);
        assert!(sequences(1.0f64, 1.0, 1).is_err());
    }

    #[test]
    fn exact_identities() {
        for (a, b) in [(1i64, 1i64), (2, 3), (-1, 2), (3, -2)] {
            let a = Exact::from_integer(a.into());
            let b = Exact::from_integer(b.into());
            for m in 2..=50 {
                let (p, q) = cube_identity_defects(&a, &b, m, 3);
                assert!(p.is_zero() && q.is_zero());
                assert!(sextic_defect(&a, &b, m, 3).is_zero());
            }
        }
    }

    #[test]
    fn float_identity_relative_to_terms() {
        let (u, v, w) = cube_sequences(&2.0f64, &3.0, 5, 3);
        assert!((2.0 * u + 3.0 * v - 1.0).abs() <= 1e-12 * (2.0 * u).abs().max((3.0 * v).abs()));
        assert!((2.0 * u - 3.0 * v - w).abs() <= 1e-12 * w.abs());
    }
}
