use std::ops::{Add, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// Finite vector in a finite-dimensional real space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>", bound = "T: Scalar")]
pub struct Vector<T> {
    coords: Vec<T>,
}

impl<T: Scalar> Vector<T> {
    /// Rejects NaN and infinite entries.
    pub fn new(coords: Vec<T>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("vector coordinates".into()));
        }
        Ok(Self { coords })
    }

    pub fn from_f64(coords: &[f64]) -> Result<Self> {
        Self::new(coords.iter().map(|&c| lit(c)).collect())
    }

    pub(crate) fn from_vec_unchecked(coords: Vec<T>) -> Self {
        Self { coords }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            coords: vec![T::zero(); dim],
        }
    }

    /// Standard basis vector `e_i`.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.coords[i] = T::one();
        v
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| c.is_zero())
    }

    pub fn scale(&self, s: T) -> Self {
        Self::from_vec_unchecked(self.coords.iter().map(|&c| c * s).collect())
    }

    pub fn dot(&self, other: &Self) -> T {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(&a, &b)| a * b)
            .sum()
    }

    /// Euclidean length, computed with scaling to avoid overflow.
    pub fn norm2(&self) -> T {
        let m = self.norm_inf();
        if m.is_zero() || !m.is_finite() {
            return m;
        }
        m * self.coords.iter().map(|&c| (c / m) * (c / m)).sum::<T>().sqrt()
    }

    pub fn norm_inf(&self) -> T {
        self.coords
            .iter()
            .fold(T::zero(), |acc, &c| acc.max(c.abs()))
    }

    /// `self + s * other`
    pub fn axpy(&self, s: T, other: &Self) -> Self {
        Self::from_vec_unchecked(
            self.coords
                .iter()
                .zip(&other.coords)
                .map(|(&a, &b)| a + s * b)
                .collect(),
        )
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: self.dim(),
            });
        }
        Ok(())
    }
}

impl<T: Scalar> TryFrom<Vec<T>> for Vector<T> {
    type Error = Error;

    fn try_from(coords: Vec<T>) -> Result<Self> {
        Self::new(coords)
    }
}

impl<T> From<Vector<T>> for Vec<T> {
    fn from(v: Vector<T>) -> Self {
        v.coords
    }
}

impl<T> Index<usize> for Vector<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.coords[i]
    }
}

impl<T: Scalar> Add for &Vector<T> {
    type Output = Vector<T>;

    fn add(self, rhs: Self) -> Vector<T> {
        debug_assert_eq!(self.dim(), rhs.dim());
        Vector::from_vec_unchecked(
            self.coords
                .iter()
                .zip(&rhs.coords)
                .map(|(&a, &b)| a + b)
                .collect(),
        )
    }
}

impl<T: Scalar> Sub for &Vector<T> {
    type Output = Vector<T>;

    fn sub(self, rhs: Self) -> Vector<T> {
        debug_assert_eq!(self.dim(), rhs.dim());
        Vector::from_vec_unchecked(
            self.coords
                .iter()
                .zip(&rhs.coords)
                .map(|(&a, &b)| a - b)
                .collect(),
        )
    }
}

impl<T: Scalar> Mul<T> for &Vector<T> {
    type Output = Vector<T>;

    fn mul(self, s: T) -> Vector<T> {
        self.scale(s)
    }
}

impl<T: Scalar> Neg for &Vector<T> {
    type Output = Vector<T>;

    fn neg(self) -> Vector<T> {
        self.scale(-T::one())
    }
}

/// Components `x_i y_j - x_j y_i` for `i < j`, in lexicographic order.
///
/// In three dimensions these are the cross-product components up to sign and
/// order, so any sign-symmetric length of the wedge is a length of `x × y`.
pub fn wedge<T: Scalar>(x: &Vector<T>, y: &Vector<T>) -> Vec<T> {
    let n = x.dim();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            out.push(x[i] * y[j] - x[j] * y[i]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite() {
        assert!(Vector::new(vec![1.0, f64::NAN]).is_err());
        assert!(Vector::new(vec![f64::INFINITY, 0.0]).is_err());
        assert!(serde_json::from_str::<Vector<f64>>("[1.0, 2.0]").is_ok());
    }

    #[test]
    fn wedge_matches_cross_product() {
        let x = Vector::<f64>::from_f64(&[1.0, 2.0, 3.0]).unwrap();
        let y = Vector::from_f64(&[-4.0, 0.5, 2.0]).unwrap();
        let w = wedge(&x, &y);
        // cross = (x1y2 - x2y1, x2y0 - x0y2, x0y1 - x1y0)
        let cross = [2.0 * 2.0 - 3.0 * 0.5, 3.0 * -4.0 - 1.0 * 2.0, 1.0 * 0.5 - 2.0 * -4.0];
        assert_eq!(w[0], cross[2]);
        assert_eq!(w[1], -cross[1]);
        assert_eq!(w[2], cross[0]);
    }

    #[test]
    fn norm2_is_scaled() {
        let v = Vector::<f64>::from_f64(&[3e200, 4e200]).unwrap();
        assert!((v.norm2() / 5e200 - 1.0).abs() < 1e-15);
    }
}
