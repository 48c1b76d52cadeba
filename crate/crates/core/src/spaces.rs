//! Concrete quasi-(2,β)-normed spaces.
//!
//! A space is a dimension, a homogeneity exponent `beta`, a declared modulus
//! of concavity `kappa` and a norm family. The built-in families are all
//! functions of the wedge `x ∧ y` (the cross product in three dimensions):
//!
//! * `CROSS_2NORM`: Euclidean length of the wedge; β = 1, κ = 1.
//! * `LP_CROSS(p)`: ℓ^p length of the wedge; β = 1, κ = 2^{1/p - 1}.
//! * `POWERED(base, e)`: `base(x, y)^e` for a β = 1 base; β = e, κ = κ_base^e.
//! * `SCALED(base, C)`: `C · base(x, y)`; same β and κ as the base.
//!
//! The declared κ is part of the descriptor and is what every downstream
//! constant uses. It may be set below the family's natural modulus, which is
//! how mis-declared spaces are exercised by [`check_axioms`].

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{out_of_range, Error, Result};
use crate::sampling::{chunk_rng, chunks, sample_triple};
use crate::scalar::{lit, to_f64, Scalar};
use crate::vector::{wedge, Vector};

/// Absolute tolerance for exact identities (symmetry).
pub const EXACT_TOL: f64 = 1e-12;
/// Relative slack for inequalities and the homogeneity identity.
pub const REL_TOL: f64 = 1e-9;
/// Bound on the value of a linearly dependent pair.
pub const DEPENDENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FamilyTag {
    #[serde(rename = "CROSS_2NORM")]
    Cross2Norm,
    LpCross,
    Powered,
    Scaled,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NormFamily<T> {
    Cross2Norm,
    LpCross { p: T },
    Powered { base: Box<NormFamily<T>>, exponent: T },
    Scaled { base: Box<NormFamily<T>>, factor: T },
}

impl<T: Scalar> NormFamily<T> {
    pub fn tag(&self) -> FamilyTag {
        match self {
            Self::Cross2Norm => FamilyTag::Cross2Norm,
            Self::LpCross { .. } => FamilyTag::LpCross,
            Self::Powered { .. } => FamilyTag::Powered,
            Self::Scaled { .. } => FamilyTag::Scaled,
        }
    }

    /// Homogeneity exponent implied by the family.
    pub fn natural_beta(&self) -> T {
        match self {
            Self::Cross2Norm | Self::LpCross { .. } => T::one(),
            Self::Powered { base, exponent } => base.natural_beta() * *exponent,
            Self::Scaled { base, .. } => base.natural_beta(),
        }
    }

    /// Modulus of concavity guaranteed by the family's construction.
    pub fn natural_kappa(&self) -> T {
        match self {
            Self::Cross2Norm => T::one(),
            Self::LpCross { p } => lit::<T>(2.0).powf(T::one() / *p - T::one()),
            Self::Powered { base, exponent } => base.natural_kappa().powf(*exponent),
            Self::Scaled { base, .. } => base.natural_kappa(),
        }
    }

    fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: T| {
            if v > T::zero() && v <= T::one() {
                Ok(())
            } else {
                Err(out_of_range(name, "(0,1]", to_f64(v)))
            }
        };
        match self {
            Self::Cross2Norm => Ok(()),
            Self::LpCross { p } => unit("p", *p),
            Self::Powered { base, exponent } => {
                unit("exponent", *exponent)?;
                base.validate()?;
                if base.natural_beta() != T::one() {
                    return Err(Error::InvalidSpace(
                        "POWERED requires a base with beta = 1".into(),
                    ));
                }
                Ok(())
            }
            Self::Scaled { base, factor } => {
                if !(factor.is_finite() && *factor > T::zero()) {
                    return Err(out_of_range("factor", "(0,inf)", to_f64(*factor)));
                }
                base.validate()
            }
        }
    }

    fn eval_wedge(&self, w: &[T]) -> T {
        match self {
            Self::Cross2Norm => {
                Vector::from_vec_unchecked(w.to_vec()).norm2()
            }
            Self::LpCross { p } => lp_length(w, *p),
            Self::Powered { base, exponent } => base.eval_wedge(w).powf(*exponent),
            Self::Scaled { base, factor } => *factor * base.eval_wedge(w),
        }
    }
}

impl<T: Scalar> NormFamily<T> {
    /// Bound on the relative change of the length when each of the `m` wedge
    /// components moves by at most `d` times the largest one.
    fn relative_rounding(&self, d: T, m: T) -> T {
        match self {
            Self::Cross2Norm => m.sqrt() * d,
            Self::LpCross { p } => m * d.powf(*p) / *p,
            Self::Powered { base, .. } | Self::Scaled { base, .. } => base.relative_rounding(d, m),
        }
    }
}

/// Floating-point error bound for `‖x, y‖`, relative to its value. The wedge
/// of nearly dependent vectors is computed with cancellation, so its
/// components carry absolute error up to `4ε ‖x‖∞ ‖y‖∞`. Capped at 1.
pub fn rounding_bound<T: Scalar>(space: &SpaceDescriptor<T>, x: &Vector<T>, y: &Vector<T>) -> T {
    let w = wedge(x, y);
    let wmax = w.iter().fold(T::zero(), |a, &c| a.max(c.abs()));
    let err = lit::<T>(4.0) * T::epsilon() * x.norm_inf() * y.norm_inf();
    if err.is_zero() {
        return T::zero();
    }
    if wmax.is_zero() {
        return T::one();
    }
    space.family.relative_rounding(err / wmax, lit(w.len() as f64)).min(T::one())
}

/// `(Σ |w_k|^p)^{1/p}`, scaled by the largest component.
fn lp_length<T: Scalar>(w: &[T], p: T) -> T {
    let m = w.iter().fold(T::zero(), |acc, &c| acc.max(c.abs()));
    if m.is_zero() {
        return m;
    }
    m * w
        .iter()
        .map(|&c| (c.abs() / m).powf(p))
        .sum::<T>()
        .powf(T::one() / p)
}

/// A concrete quasi-(2,β)-normed space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpace<T>", into = "RawSpace<T>", bound = "T: Scalar")]
pub struct SpaceDescriptor<T> {
    pub dim: usize,
    pub beta: T,
    pub kappa: T,
    pub family: NormFamily<T>,
}

impl<T: Scalar> SpaceDescriptor<T> {
    /// Builds a space; `beta` and `kappa` default to the family's natural values.
    pub fn new(dim: usize, family: NormFamily<T>, beta: Option<T>, kappa: Option<T>) -> Result<Self> {
        family.validate()?;
        let beta = beta.unwrap_or_else(|| family.natural_beta());
        let kappa = kappa.unwrap_or_else(|| family.natural_kappa());
        let space = Self {
            dim,
            beta,
            kappa,
            family,
        };
        space.validate()?;
        Ok(space)
    }

    pub fn cross_2norm(dim: usize) -> Result<Self> {
        Self::new(dim, NormFamily::Cross2Norm, None, None)
    }

    pub fn lp_cross(dim: usize, p: T) -> Result<Self> {
        Self::new(dim, NormFamily::LpCross { p }, None, None)
    }

    /// `C · base` with the base's β and declared κ.
    pub fn scaled(base: &Self, factor: T) -> Result<Self> {
        Self::new(
            base.dim,
            NormFamily::Scaled {
                base: Box::new(base.family.clone()),
                factor,
            },
            Some(base.beta),
            Some(base.kappa),
        )
    }

    /// Same space with a different declared modulus.
    pub fn with_kappa(&self, kappa: T) -> Result<Self> {
        let mut s = self.clone();
        s.kappa = kappa;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::InvalidSpace(format!("dim must be at least 2, got {}", self.dim)));
        }
        if !(self.beta > T::zero() && self.beta <= T::one()) {
            return Err(out_of_range("beta", "(0,1]", to_f64(self.beta)));
        }
        if !(self.kappa.is_finite() && self.kappa >= T::one()) {
            return Err(out_of_range("kappa", "[1,inf)", to_f64(self.kappa)));
        }
        self.family.validate()?;
        let natural = self.family.natural_beta();
        if (natural - self.beta).abs() > lit::<T>(1e-12) * natural {
            return Err(Error::InvalidSpace(format!(
                "declared beta {} does not match the family's homogeneity {}",
                self.beta, natural
            )));
        }
        Ok(())
    }

    /// A basis vector `e_i` with `‖x, e_i‖ > 0`, if any.
    pub fn independent_witness(&self, x: &Vector<T>) -> Result<Option<Vector<T>>> {
        for i in 0..self.dim {
            let e = Vector::basis(self.dim, i);
            if eval_norm(self, x, &e)? > T::zero() {
                return Ok(Some(e));
            }
        }
        Ok(None)
    }
}

/// `‖x, y‖` for the given space.
pub fn eval_norm<T: Scalar>(space: &SpaceDescriptor<T>, x: &Vector<T>, y: &Vector<T>) -> Result<T> {
    x.check_dim(space.dim)?;
    y.check_dim(space.dim)?;
    if !x.is_finite() || !y.is_finite() {
        return Err(Error::NonFinite("norm arguments".into()));
    }
    Ok(space.family.eval_wedge(&wedge(x, y)))
}

/// Example-2.2 transform: `‖x, y‖^β` on a β = 1 base, declaring modulus `κ^β`.
pub fn power_space<T: Scalar>(base: &SpaceDescriptor<T>, beta: T) -> Result<SpaceDescriptor<T>> {
    if !(beta > T::zero() && beta <= T::one()) {
        return Err(out_of_range("beta", "(0,1]", to_f64(beta)));
    }
    if base.beta != T::one() {
        return Err(Error::InvalidSpace("power_space needs a base with beta = 1".into()));
    }
    if beta == T::one() {
        return Ok(base.clone());
    }
    SpaceDescriptor::new(
        base.dim,
        NormFamily::Powered {
            base: Box::new(base.family.clone()),
            exponent: beta,
        },
        Some(beta),
        Some(base.kappa.powf(beta)),
    )
}

/// True iff every 2×2 minor of `[x; y]` is within `tol · ‖x‖∞ ‖y‖∞`.
///
/// Panics if the dimensions differ.
pub fn is_dependent<T: Scalar>(x: &Vector<T>, y: &Vector<T>, tol: T) -> bool {
    assert_eq!(x.dim(), y.dim(), "is_dependent needs equal dimensions");
    let scale = x.norm_inf() * y.norm_inf();
    let largest = wedge(x, y)
        .into_iter()
        .fold(T::zero(), |acc, m| acc.max(m.abs()));
    largest <= tol * scale
}

/// Measured B3 ratio `‖λx, y‖ / ‖x, y‖`.
pub fn b3_ratio<T: Scalar>(space: &SpaceDescriptor<T>, x: &Vector<T>, y: &Vector<T>, lambda: T) -> Result<T> {
    Ok(eval_norm(space, &x.scale(lambda), y)? / eval_norm(space, x, y)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Witness<T> {
    pub x: Vector<T>,
    pub y: Vector<T>,
    pub z: Vector<T>,
    pub lambda: T,
    /// Measured quantity for the axiom (value, gap or ratio).
    pub ratio: T,
    /// Measured deviation divided by the allowed one; > 1 is a violation.
    pub severity: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AxiomTally<T> {
    pub checks: u64,
    pub violations: u64,
    pub worst: Option<Witness<T>>,
}

impl<T: Scalar> Default for AxiomTally<T> {
    fn default() -> Self {
        Self {
            checks: 0,
            violations: 0,
            worst: None,
        }
    }
}

impl<T: Scalar> AxiomTally<T> {
    fn record(&mut self, w: Witness<T>) {
        self.checks += 1;
        if w.severity > T::one() || w.severity.is_nan() {
            self.violations += 1;
        }
        match &self.worst {
            Some(cur) if !(w.severity > cur.severity) => {}
            _ => self.worst = Some(w),
        }
    }

    fn merge(mut self, other: Self) -> Self {
        self.checks += other.checks;
        self.violations += other.violations;
        if let Some(w) = other.worst {
            match &self.worst {
                Some(cur) if !(w.severity > cur.severity) => {}
                _ => self.worst = Some(w),
            }
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct AxiomReport<T> {
    pub trials: u64,
    pub declared_kappa: T,
    pub b1: AxiomTally<T>,
    pub b2: AxiomTally<T>,
    pub b3: AxiomTally<T>,
    pub b4: AxiomTally<T>,
    /// Largest `‖x, y+z‖ / (‖x, y‖ + ‖x, z‖)` seen.
    pub kappa_observed: T,
}

impl<T: Scalar> AxiomReport<T> {
    fn empty(declared_kappa: T) -> Self {
        Self {
            trials: 0,
            declared_kappa,
            b1: AxiomTally::default(),
            b2: AxiomTally::default(),
            b3: AxiomTally::default(),
            b4: AxiomTally::default(),
            kappa_observed: T::zero(),
        }
    }

    /// Associative merge of two partial reports.
    pub fn merge(self, other: Self) -> Self {
        Self {
            trials: self.trials + other.trials,
            declared_kappa: self.declared_kappa,
            b1: self.b1.merge(other.b1),
            b2: self.b2.merge(other.b2),
            b3: self.b3.merge(other.b3),
            b4: self.b4.merge(other.b4),
            kappa_observed: self.kappa_observed.max(other.kappa_observed),
        }
    }

    pub fn total_violations(&self) -> u64 {
        self.b1.violations + self.b2.violations + self.b3.violations + self.b4.violations
    }
}

/// Randomized check of axioms B1–B4 against the declared κ.
///
/// Per trial: B1 on an exactly dependent pair `(x, ±2^k x)` and on `(x, 0)`,
/// plus the converse (an independent pair must not vanish); B2 on `(x, y)`;
/// B3 on `(λx, y)`; B4 on `(x, y, z)`. Powers of two keep the dependent pair
/// exactly dependent in floating point.
pub fn check_axioms<T: Scalar>(space: &SpaceDescriptor<T>, trials: usize, seed: u64) -> Result<AxiomReport<T>> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    space.validate()?;
    let parts = chunks(trials)
        .into_par_iter()
        .map(|(c, range)| {
            let mut rng = chunk_rng(seed, c);
            let mut rep = AxiomReport::empty(space.kappa);
            for _ in range {
                let t = sample_triple::<T, _>(&mut rng, space.dim);
                let k: i32 = rng.gen_range(-4..=4);
                let sign = if rng.gen::<bool>() { T::one() } else { -T::one() };
                axiom_trial(space, &t.x, &t.y, &t.z, t.lambda, sign * lit::<T>(2.0).powi(k), &mut rep)?;
            }
            Ok(rep)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts
        .into_iter()
        .fold(AxiomReport::empty(space.kappa), AxiomReport::merge))
}

fn axiom_trial<T: Scalar>(
    space: &SpaceDescriptor<T>,
    x: &Vector<T>,
    y: &Vector<T>,
    z: &Vector<T>,
    lambda: T,
    dep_factor: T,
    rep: &mut AxiomReport<T>,
) -> Result<()> {
    let rel: T = lit(REL_TOL);
    let witness = |ratio: T, severity: T| Witness {
        x: x.clone(),
        y: y.clone(),
        z: z.clone(),
        lambda,
        ratio,
        severity,
    };
    rep.trials += 1;

    // B1
    let zero = Vector::zeros(space.dim);
    for partner in [x.scale(dep_factor), zero] {
        let v = eval_norm(space, x, &partner)?;
        rep.b1.record(witness(v, v / lit(DEPENDENT_TOL)));
    }
    let nxy = eval_norm(space, x, y)?;
    if !is_dependent(x, y, lit(1e-12)) {
        let severity = if nxy > T::zero() { T::zero() } else { T::infinity() };
        rep.b1.record(witness(nxy, severity));
    }

    // B2
    let nyx = eval_norm(space, y, x)?;
    let gap = (nxy - nyx).abs();
    rep.b2.record(witness(gap, gap / lit(EXACT_TOL)));

    // B3
    let lhs = eval_norm(space, &x.scale(lambda), y)?;
    let rhs = lambda.abs().powf(space.beta) * nxy;
    let measured = if nxy > T::zero() { lhs / nxy } else { T::zero() };
    let slack = lhs.max(rhs) * (rounding_bound(space, x, y) + rounding_bound(space, &x.scale(lambda), y));
    rep.b3
        .record(witness(measured, (lhs - rhs).abs() / (rel * (T::one() + nxy) + slack)));

    // B4
    let yz = y + z;
    let num = eval_norm(space, x, &yz)?;
    let nxz = eval_norm(space, x, z)?;
    let den = nxy + nxz;
    let slack = num * rounding_bound(space, x, &yz)
        + space.kappa * (nxy * rounding_bound(space, x, y) + nxz * rounding_bound(space, x, z));
    let allowed = space.kappa * den * (T::one() + rel) + slack + lit(EXACT_TOL);
    let ratio = if den > T::zero() { num / den } else { T::zero() };
    rep.b4.record(witness(ratio, num / allowed));
    if den > lit(1e-12) {
        rep.kappa_observed = rep.kappa_observed.max(ratio);
    }
    Ok(())
}

/// Lower bound on the modulus of concavity: the largest sampled
/// `‖x, y+z‖ / (‖x, y‖ + ‖x, z‖)`. Triples with denominator ≤ 1e-12 are skipped.
///
/// Uses the same trial stream as [`check_axioms`], so the estimate for
/// `2k` trials is at least the estimate for `k` trials with the same seed.
pub fn estimate_kappa<T: Scalar>(space: &SpaceDescriptor<T>, trials: usize, seed: u64) -> Result<T> {
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let tol: T = lit(1e-12);
    let parts = chunks(trials)
        .into_par_iter()
        .map(|(c, range)| {
            let mut rng = chunk_rng(seed, c);
            let mut best = T::zero();
            for _ in range {
                let t = sample_triple::<T, _>(&mut rng, space.dim);
                // keep the stream aligned with check_axioms
                let _: i32 = rng.gen_range(-4..=4);
                let _: bool = rng.gen();
                let den = eval_norm(space, &t.x, &t.y)? + eval_norm(space, &t.x, &t.z)?;
                if den <= tol {
                    continue;
                }
                best = best.max(eval_norm(space, &t.x, &(&t.y + &t.z))? / den);
            }
            Ok(best)
        })
        .collect::<Result<Vec<T>>>()?;
    Ok(parts.into_iter().fold(T::zero(), T::max))
}

// --- serialization ---------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct RawFamily<T> {
    family: FamilyTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base: Option<Box<RawFamily<T>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exponent: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    factor: Option<T>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct RawSpace<T> {
    family: FamilyTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base: Option<Box<RawFamily<T>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    exponent: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    factor: Option<T>,
    #[serde(default = "default_dim")]
    dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta: Option<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kappa: Option<T>,
}

fn default_dim() -> usize {
    3
}

fn missing(field: &str, family: &str) -> Error {
    Error::InvalidSpace(format!("{family} requires field `{field}`"))
}

fn family_from_parts<T: Scalar>(
    tag: FamilyTag,
    p: Option<T>,
    base: Option<Box<RawFamily<T>>>,
    exponent: Option<T>,
    factor: Option<T>,
) -> Result<NormFamily<T>> {
    let unexpected = |name: &str, present: bool| {
        if present {
            Err(Error::InvalidSpace(format!("unexpected field `{name}` for {tag:?}")))
        } else {
            Ok(())
        }
    };
    let fam = match tag {
        FamilyTag::Cross2Norm => {
            unexpected("p", p.is_some())?;
            unexpected("base", base.is_some())?;
            unexpected("exponent", exponent.is_some())?;
            unexpected("factor", factor.is_some())?;
            NormFamily::Cross2Norm
        }
        FamilyTag::LpCross => {
            unexpected("base", base.is_some())?;
            unexpected("exponent", exponent.is_some())?;
            unexpected("factor", factor.is_some())?;
            NormFamily::LpCross {
                p: p.ok_or_else(|| missing("p", "LP_CROSS"))?,
            }
        }
        FamilyTag::Powered => {
            unexpected("p", p.is_some())?;
            unexpected("factor", factor.is_some())?;
            NormFamily::Powered {
                base: Box::new(NormFamily::try_from(*base.ok_or_else(|| missing("base", "POWERED"))?)?),
                exponent: exponent.ok_or_else(|| missing("exponent", "POWERED"))?,
            }
        }
        FamilyTag::Scaled => {
            unexpected("p", p.is_some())?;
            unexpected("exponent", exponent.is_some())?;
            NormFamily::Scaled {
                base: Box::new(NormFamily::try_from(*base.ok_or_else(|| missing("base", "SCALED"))?)?),
                factor: factor.ok_or_else(|| missing("factor", "SCALED"))?,
            }
        }
    };
    fam.validate()?;
    Ok(fam)
}

impl<T: Scalar> TryFrom<RawFamily<T>> for NormFamily<T> {
    type Error = Error;

    fn try_from(r: RawFamily<T>) -> Result<Self> {
        family_from_parts(r.family, r.p, r.base, r.exponent, r.factor)
    }
}

impl<T: Scalar> From<NormFamily<T>> for RawFamily<T> {
    fn from(f: NormFamily<T>) -> Self {
        let mut raw = RawFamily {
            family: f.tag(),
            p: None,
            base: None,
            exponent: None,
            factor: None,
        };
        match f {
            NormFamily::Cross2Norm => {}
            NormFamily::LpCross { p } => raw.p = Some(p),
            NormFamily::Powered { base, exponent } => {
                raw.base = Some(Box::new((*base).into()));
                raw.exponent = Some(exponent);
            }
            NormFamily::Scaled { base, factor } => {
                raw.base = Some(Box::new((*base).into()));
                raw.factor = Some(factor);
            }
        }
        raw
    }
}

impl<T: Scalar> TryFrom<RawSpace<T>> for SpaceDescriptor<T> {
    type Error = Error;

    fn try_from(r: RawSpace<T>) -> Result<Self> {
        let family = family_from_parts(r.family, r.p, r.base, r.exponent, r.factor)?;
        SpaceDescriptor::new(r.dim, family, r.beta, r.kappa)
    }
}

impl<T: Scalar> From<SpaceDescriptor<T>> for RawSpace<T> {
    fn from(s: SpaceDescriptor<T>) -> Self {
        let f: RawFamily<T> = s.family.into();
        RawSpace {
            family: f.family,
            p: f.p,
            base: f.base,
            exponent: f.exponent,
            factor: f.factor,
            dim: s.dim,
            beta: Some(s.beta),
            kappa: Some(s.kappa),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(c: &[f64]) -> Vector<f64> {
        Vector::from_f64(c).unwrap()
    }

    fn cross() -> SpaceDescriptor<f64> {
        SpaceDescriptor::cross_2norm(3).unwrap()
    }

    #[test]
    fn eval_norm_examples() {
        let s = cross();
        assert_eq!(eval_norm(&s, &v(&[1., 0., 0.]), &v(&[0., 1., 0.])).unwrap(), 1.0);
        assert_eq!(eval_norm(&s, &v(&[1., 0., 0.]), &v(&[2., 0., 0.])).unwrap(), 0.0);
        let half = power_space(&s, 0.5).unwrap();
        let val = eval_norm(&half, &v(&[2., 0., 0.]), &v(&[0., 2., 0.])).unwrap();
        assert!((val - 2.0).abs() < 1e-15);
    }

    #[test]
    fn eval_norm_errors() {
        let s = cross();
        assert!(matches!(
            eval_norm(&s, &v(&[1., 0.]), &v(&[0., 1., 0.])),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
        assert!(Vector::new(vec![f64::NAN, 0., 0.]).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let s = SpaceDescriptor::<f32>::cross_2norm(3).unwrap();
        let x = Vector::from_f64(&[3., 0., 0.]).unwrap();
        let y = Vector::from_f64(&[0., 4., 0.]).unwrap();
        assert_eq!(eval_norm(&s, &x, &y).unwrap(), 12.0_f32);
    }

    #[test]
    fn power_space_declares_kappa_power() {
        let base = SpaceDescriptor::<f64>::lp_cross(3, 0.5).unwrap();
        assert_eq!(base.kappa, 2.0);
        let p = power_space(&base, 0.5).unwrap();
        assert!((p.kappa - std::f64::consts::SQRT_2).abs() < 1e-12);
        assert_eq!(p.beta, 0.5);
        assert_eq!(power_space(&base, 1.0).unwrap(), base);
        assert!(matches!(power_space(&base, 1.5), Err(Error::OutOfRange { .. })));
        assert!(power_space(&base, 0.0).is_err());
        assert!(power_space(&p, 0.5).is_err());
    }

    #[test]
    fn power_space_is_pointwise_power() {
        let base = SpaceDescriptor::lp_cross(3, 0.7).unwrap();
        let p = power_space(&base, 0.3).unwrap();
        let x = v(&[1.5, -2., 0.25]);
        let y = v(&[0.3, 4., -1.]);
        let b = eval_norm(&base, &x, &y).unwrap();
        let q = eval_norm(&p, &x, &y).unwrap();
        assert!((q - b.powf(0.3)).abs() <= 4.0 * f64::EPSILON * q);
    }

    #[test]
    fn is_dependent_examples() {
        assert!(is_dependent(&v(&[1., 0., 0.]), &v(&[2., 0., 0.]), 1e-12));
        assert!(!is_dependent(&v(&[1., 0., 0.]), &v(&[0., 1., 0.]), 1e-12));
        assert!(is_dependent(&v(&[1., 2., 3.]), &v(&[2., 4., 6.0000000001]), 1e-6));
        assert!(is_dependent(&v(&[0., 0., 0.]), &v(&[2., 1., 0.]), 1e-12));
    }

    #[test]
    fn b3_witness_ratio() {
        let p = power_space(&cross(), 0.5).unwrap();
        let r = b3_ratio(&p, &v(&[1., 2., -1.]), &v(&[0.5, 0., 3.]), -3.0).unwrap();
        assert!((r - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn cross_norm_has_no_violations() {
        let rep = check_axioms(&cross(), 10_000, 11).unwrap();
        assert_eq!(rep.trials, 10_000);
        assert_eq!(rep.total_violations(), 0, "{rep:?}");
        assert!(rep.kappa_observed <= 1.0 + 1e-9);
    }

    #[test]
    fn underdeclared_kappa_is_caught() {
        let s = SpaceDescriptor::lp_cross(3, 0.5).unwrap().with_kappa(1.0).unwrap();
        let rep = check_axioms(&s, 10_000, 3).unwrap();
        assert!(rep.b4.violations > 0);
        assert_eq!(rep.b1.violations + rep.b2.violations + rep.b3.violations, 0);
        let w = rep.b4.worst.unwrap();
        assert!(w.ratio > 1.0);
    }

    #[test]
    fn axioms_are_deterministic() {
        let s = SpaceDescriptor::lp_cross(4, 0.6).unwrap();
        assert_eq!(check_axioms(&s, 700, 5).unwrap(), check_axioms(&s, 700, 5).unwrap());
    }

    #[test]
    fn kappa_estimates() {
        let c = estimate_kappa(&cross(), 20_000, 1).unwrap();
        assert!(c <= 1.0 + 1e-9 && c > 0.9);
        let lp = SpaceDescriptor::lp_cross(3, 0.5).unwrap();
        let k1 = estimate_kappa(&lp, 5_000, 9).unwrap();
        let k2 = estimate_kappa(&lp, 10_000, 9).unwrap();
        assert!(k2 >= k1);
        assert!(k2 <= 2.0 + 1e-9);
    }

    #[test]
    fn independent_witness_exists_for_nonzero() {
        let s = SpaceDescriptor::lp_cross(3, 0.5).unwrap();
        let x = v(&[0., 0., 2.]);
        let w = s.independent_witness(&x).unwrap().unwrap();
        assert!(eval_norm(&s, &x, &w).unwrap() > 0.0);
        assert!(s.independent_witness(&v(&[0., 0., 0.])).unwrap().is_none());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let s: SpaceDescriptor<f64> =
            serde_json::from_str(r#"{"family":"LP_CROSS","p":0.5,"dim":3,"beta":1.0,"kappa":2.0}"#).unwrap();
        assert_eq!(s, SpaceDescriptor::lp_cross(3, 0.5).unwrap());
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<SpaceDescriptor<f64>>(&text).unwrap(), s);

        let powered: SpaceDescriptor<f64> = serde_json::from_str(
            r#"{"family":"POWERED","base":{"family":"CROSS_2NORM"},"exponent":0.5}"#,
        )
        .unwrap();
        assert_eq!(powered.beta, 0.5);
        assert_eq!(powered.kappa, 1.0);

        let bad = serde_json::from_str::<SpaceDescriptor<f64>>(r#"{"family":"CROSS_2NORM","beta":1.5}"#);
        assert!(bad.unwrap_err().to_string().contains("beta must lie in (0,1]"));
        assert!(serde_json::from_str::<SpaceDescriptor<f64>>(r#"{"family":"CROSS_2NORM","bogus":1}"#).is_err());
        assert!(serde_json::from_str::<SpaceDescriptor<f64>>(r#"{"family":"LP_CROSS"}"#).is_err());
    }
}
