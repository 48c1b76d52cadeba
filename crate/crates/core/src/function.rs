//! Functions `ℝ → X` built from signed-power terms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::vector::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AbsMode {
    /// `|x|^e`
    Abs,
    /// `sign(x) |x|^e`
    Signed,
}

impl AbsMode {
    /// The term's scalar factor `m(x)`. Multiplicative: `m(st) = m(s) m(t)`.
    pub fn apply<T: Scalar>(self, x: T, exponent: T) -> T {
        let m = x.abs().powf(exponent);
        match self {
            AbsMode::Abs => m,
            AbsMode::Signed if x < T::zero() => -m,
            AbsMode::Signed if x > T::zero() => m,
            AbsMode::Signed => T::zero(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct PowerTerm<T> {
    pub coef: T,
    pub exponent: T,
    pub abs_mode: AbsMode,
    pub direction: Vector<T>,
}

impl<T: Scalar> PowerTerm<T> {
    pub fn new(coef: T, exponent: T, abs_mode: AbsMode, direction: Vector<T>) -> Self {
        Self {
            coef,
            exponent,
            abs_mode,
            direction,
        }
    }

    pub fn factor(&self, x: T) -> T {
        self.coef * self.abs_mode.apply(x, self.exponent)
    }
}

/// `f(x) = Σ coef · m(x) · direction + constant`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFunction<T>", into = "RawFunction<T>", bound = "T: Scalar")]
pub struct VectorFunction<T> {
    terms: Vec<PowerTerm<T>>,
    constant: Vector<T>,
}

impl<T: Scalar> VectorFunction<T> {
    pub fn new(terms: Vec<PowerTerm<T>>, constant: Vector<T>) -> Result<Self> {
        let dim = constant.dim();
        for t in &terms {
            t.direction.check_dim(dim)?;
            if !(t.coef.is_finite() && t.exponent.is_finite()) {
                return Err(Error::NonFinite("function term".into()));
            }
        }
        Ok(Self { terms, constant })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            terms: Vec::new(),
            constant: Vector::zeros(dim),
        }
    }

    pub fn constant(w: Vector<T>) -> Self {
        Self {
            terms: Vec::new(),
            constant: w,
        }
    }

    /// Single term `coef · m(x) · direction`.
    pub fn power(coef: T, exponent: T, abs_mode: AbsMode, direction: Vector<T>) -> Self {
        let dim = direction.dim();
        Self {
            terms: vec![PowerTerm::new(coef, exponent, abs_mode, direction)],
            constant: Vector::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.constant.dim()
    }

    pub fn terms(&self) -> &[PowerTerm<T>] {
        &self.terms
    }

    pub fn constant_part(&self) -> &Vector<T> {
        &self.constant
    }

    /// Sum of two functions (terms concatenated, constants added).
    pub fn plus(&self, other: &Self) -> Result<Self> {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        other.constant.check_dim(self.dim())?;
        Self::new(terms, &self.constant + &other.constant)
    }

    /// Replaces each term coefficient by `coef · g(term)` and the constant by
    /// `k · constant`.
    pub fn map_coefficients(&self, g: impl Fn(&PowerTerm<T>) -> T, k: T) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| PowerTerm {
                    coef: t.coef * g(t),
                    ..t.clone()
                })
                .collect(),
            constant: self.constant.scale(k),
        }
    }

    pub fn eval(&self, x: T) -> Result<Vector<T>> {
        let mut acc = self.constant.clone();
        for t in &self.terms {
            acc = acc.axpy(t.factor(x), &t.direction);
        }
        if !acc.is_finite() {
            return Err(Error::NonFinite(format!("function value at x = {x}")));
        }
        Ok(acc)
    }

    /// Function without its constant part.
    pub fn without_constant(&self) -> Self {
        Self {
            terms: self.terms.clone(),
            constant: Vector::zeros(self.dim()),
        }
    }
}

/// Anything that maps reals to vectors.
pub trait Evaluate<T: Scalar>: Sync {
    fn value(&self, x: T) -> Result<Vector<T>>;
}

impl<T: Scalar> Evaluate<T> for VectorFunction<T> {
    fn value(&self, x: T) -> Result<Vector<T>> {
        self.eval(x)
    }
}

impl<T: Scalar, F: Fn(T) -> Result<Vector<T>> + Sync> Evaluate<T> for F {
    fn value(&self, x: T) -> Result<Vector<T>> {
        self(x)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct RawFunction<T> {
    #[serde(default)]
    terms: Vec<PowerTerm<T>>,
    constant: Vector<T>,
}

impl<T: Scalar> TryFrom<RawFunction<T>> for VectorFunction<T> {
    type Error = Error;

    fn try_from(r: RawFunction<T>) -> Result<Self> {
        Self::new(r.terms, r.constant)
    }
}

impl<T: Scalar> From<VectorFunction<T>> for RawFunction<T> {
    fn from(f: VectorFunction<T>) -> Self {
        Self {
            terms: f.terms,
            constant: f.constant,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e3() -> Vector<f64> {
        Vector::basis(3, 2)
    }

    #[test]
    fn signed_and_abs_modes() {
        assert_eq!(AbsMode::Abs.apply(-2.0, 3.0), 8.0);
        assert_eq!(AbsMode::Signed.apply(-2.0, 3.0), -8.0);
        assert_eq!(AbsMode::Signed.apply(0.0, 3.0), 0.0);
    }

    #[test]
    fn eval_sums_terms_and_constant() {
        let f = VectorFunction::power(2.0, 6.0, AbsMode::Abs, e3())
            .plus(&VectorFunction::constant(Vector::basis(3, 0)))
            .unwrap();
        assert_eq!(f.eval(-1.0).unwrap().coords(), &[1.0, 0.0, 2.0]);
    }

    #[test]
    fn negative_exponent_at_zero_is_error() {
        let f = VectorFunction::power(1.0, -3.0, AbsMode::Abs, e3());
        assert!(matches!(f.eval(0.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"terms":[{"coef":1.0,"exponent":6.0,"abs_mode":"ABS","direction":[0.0,0.0,1.0]}],"constant":[0.0,0.0,0.0]}"#;
        let f: VectorFunction<f64> = serde_json::from_str(text).unwrap();
        assert_eq!(serde_json::to_string(&f).unwrap(), text);
        let bad = r#"{"terms":[{"coef":1.0,"exponent":6.0,"abs_mode":"ABS","direction":[0.0,1.0]}],"constant":[0.0,0.0,0.0]}"#;
        assert!(serde_json::from_str::<VectorFunction<f64>>(bad).is_err());
    }
}
