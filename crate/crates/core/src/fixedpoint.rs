//! Fixed-point engine for operators of the form
//! `(Tξ)(x) = Σ_i coef_i · ξ(scale_i · x)` on functions `ℝ\{0} → X`.
//!
//! The operator satisfies the Lipschitz-type condition
//! `‖Tξ(x) − Tμ(x), y‖ ≤ Σ_i L_i ‖ξ(scale_i x) − μ(scale_i x), y‖`
//! with constant weights `L_i = κ^{e_i} |coef_i|^β`, and the control operator
//! `(Λδ)(x, y) = Σ_i L_i δ(scale_i x, y)` acts on error bounds.
//!
//! Both operators act on power terms in closed form: `T` multiplies a term
//! `coef · m(x)` by `Σ_i coef_i m(scale_i)`, and `Λ` multiplies `c |x|^s` by
//! `Σ_i L_i |scale_i|^s`. Iteration therefore never needs function values
//! off the sample set.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envelope::theta;
use crate::error::{out_of_range, Error, Result};
use crate::function::{AbsMode, Evaluate, VectorFunction};
use crate::scalar::{lit, real_root, to_f64, Scalar};
use crate::spaces::{eval_norm, SpaceDescriptor};
use crate::vector::Vector;

/// Relative tolerance on the declared Lipschitz weights.
const LIPSCHITZ_TOL: f64 = 1e-12;
/// Consecutive small steps needed to declare convergence.
const STABLE_STEPS: usize = 3;
/// Consecutive non-decreasing terms that mark a series as divergent.
const DIVERGENCE_RUN: usize = 8;
/// Highest order at which the step-versus-Λⁿε induction is checked.
pub const INDUCTION_DEPTH: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct Branch<T> {
    pub scale: T,
    pub coef: T,
    /// `L_i = κ^{e_i} |coef|^β`
    pub lipschitz: T,
    /// `e_i ∈ {1, 2}`
    pub kappa_exponent: u8,
    /// `(R, n)` when `scale = ⁿ√R`; powers are then taken of `R`, which is
    /// often exact where `scale` is not.
    #[serde(skip)]
    pub root_of: Option<(T, u32)>,
}

impl<T: Scalar> Branch<T> {
    /// Branch with the weight implied by the space.
    pub fn new(space: &SpaceDescriptor<T>, scale: T, coef: T, kappa_exponent: u8) -> Self {
        Self {
            scale,
            coef,
            lipschitz: implied_weight(space, coef, kappa_exponent),
            kappa_exponent,
            root_of: None,
        }
    }

    /// Branch with `scale = ⁿ√r` for odd `n`.
    pub fn radical(space: &SpaceDescriptor<T>, r: T, n: u32, coef: T, kappa_exponent: u8) -> Self {
        Self {
            root_of: Some((r, n)),
            ..Self::new(space, real_root(r, n), coef, kappa_exponent)
        }
    }

    /// `m(scale)` for a term of the given mode and exponent.
    pub fn scale_factor(&self, mode: AbsMode, exponent: T) -> T {
        match self.root_of {
            Some((r, n)) => mode.apply(r, exponent / lit::<T>(n as f64)),
            None => mode.apply(self.scale, exponent),
        }
    }
}

fn implied_weight<T: Scalar>(space: &SpaceDescriptor<T>, coef: T, e: u8) -> T {
    space.kappa.powi(e as i32) * coef.abs().powf(space.beta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec<T>", into = "RawSpec<T>", bound = "T: Scalar")]
pub struct IterationSpec<T> {
    branches: Vec<Branch<T>>,
    space: SpaceDescriptor<T>,
}

impl<T: Scalar> IterationSpec<T> {
    pub fn new(space: SpaceDescriptor<T>, branches: Vec<Branch<T>>) -> Result<Self> {
        space.validate()?;
        if branches.is_empty() {
            return Err(Error::InvalidSpec("at least one branch is required".into()));
        }
        for (i, b) in branches.iter().enumerate() {
            if !(b.scale.is_finite() && b.scale != T::zero()) {
                return Err(Error::InvalidSpec(format!("branch {i}: scale must be finite and nonzero")));
            }
            if !b.coef.is_finite() {
                return Err(Error::InvalidSpec(format!("branch {i}: coef must be finite")));
            }
            if !(1..=2).contains(&b.kappa_exponent) {
                return Err(Error::InvalidSpec(format!("branch {i}: kappa_exponent must be 1 or 2")));
            }
            let want = implied_weight(&space, b.coef, b.kappa_exponent);
            if (b.lipschitz - want).abs() > lit::<T>(LIPSCHITZ_TOL) * want.max(T::min_positive_value()) {
                return Err(Error::InvalidSpec(format!(
                    "branch {i}: L = {} but kappa^{} |coef|^beta = {}",
                    b.lipschitz, b.kappa_exponent, want
                )));
            }
        }
        Ok(Self { branches, space })
    }

    /// Spec from `(scale, coef, kappa_exponent)` triples.
    pub fn from_parts(space: SpaceDescriptor<T>, parts: &[(T, T, u8)]) -> Result<Self> {
        let branches = parts
            .iter()
            .map(|&(s, c, e)| Branch::new(&space, s, c, e))
            .collect();
        Self::new(space, branches)
    }

    pub fn branches(&self) -> &[Branch<T>] {
        &self.branches
    }

    pub fn space(&self) -> &SpaceDescriptor<T> {
        &self.space
    }

    pub fn theta(&self) -> Result<T> {
        theta(self.space.beta, self.space.kappa)
    }

    /// `Σ_i coef_i m(scale_i)` for a term with the given exponent and mode.
    pub fn term_multiplier(&self, term: &crate::function::PowerTerm<T>) -> T {
        self.branches
            .iter()
            .map(|b| b.coef * b.scale_factor(term.abs_mode, term.exponent))
            .sum()
    }

    /// `Σ_i coef_i`, the action on constants.
    pub fn constant_multiplier(&self) -> T {
        self.branches.iter().map(|b| b.coef).sum()
    }

    /// `Σ_i L_i |scale_i|^s`, the action of Λ on `|x|^s`.
    pub fn lambda_multiplier(&self, s: T) -> T {
        self.branches
            .iter()
            .map(|b| b.lipschitz * b.scale_factor(AbsMode::Abs, s))
            .sum()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct RawBranch<T> {
    scale: T,
    coef: T,
    kappa_exponent: u8,
    #[serde(default)]
    lipschitz: Option<T>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct RawSpec<T> {
    space: SpaceDescriptor<T>,
    branches: Vec<RawBranch<T>>,
}

impl<T: Scalar> TryFrom<RawSpec<T>> for IterationSpec<T> {
    type Error = Error;

    fn try_from(r: RawSpec<T>) -> Result<Self> {
        let branches = r
            .branches
            .iter()
            .map(|b| {
                let mut out = Branch::new(&r.space, b.scale, b.coef, b.kappa_exponent);
                if let Some(l) = b.lipschitz {
                    out.lipschitz = l;
                }
                out
            })
            .collect();
        Self::new(r.space, branches)
    }
}

impl<T: Scalar> From<IterationSpec<T>> for RawSpec<T> {
    fn from(s: IterationSpec<T>) -> Self {
        RawSpec {
            branches: s
                .branches
                .into_iter()
                .map(|b| RawBranch {
                    scale: b.scale,
                    coef: b.coef,
                    kappa_exponent: b.kappa_exponent,
                    lipschitz: Some(b.lipschitz),
                })
                .collect(),
            space: s.space,
        }
    }
}

/// `(Tf)(x) = Σ_i coef_i f(scale_i x)`.
pub fn apply_t<T: Scalar>(spec: &IterationSpec<T>, f: &impl Evaluate<T>, x: T) -> Result<Vector<T>> {
    if x == T::zero() {
        return Err(Error::ZeroArgument);
    }
    let mut acc: Option<Vector<T>> = None;
    for b in &spec.branches {
        let v = f.value(b.scale * x)?;
        acc = Some(match acc {
            None => v.scale(b.coef),
            Some(a) => a.axpy(b.coef, &v),
        });
    }
    Ok(acc.expect("spec has at least one branch"))
}

/// Closed-form image `T f` of a term-family function.
pub fn apply_to_function<T: Scalar>(spec: &IterationSpec<T>, f: &VectorFunction<T>) -> VectorFunction<T> {
    f.map_coefficients(|t| spec.term_multiplier(t), spec.constant_multiplier())
}

/// `Tⁿ f` in closed form.
pub fn t_power<T: Scalar>(spec: &IterationSpec<T>, f: &VectorFunction<T>, n: usize) -> VectorFunction<T> {
    (0..n).fold(f.clone(), |g, _| apply_to_function(spec, &g))
}

/// `(Tⁿf)(x)` by recursion over the multiplicative orbit of `x`, memoized
/// on the multi-index of scale powers (the scalings commute).
pub fn orbit_apply<T: Scalar>(spec: &IterationSpec<T>, f: &impl Evaluate<T>, x: T, n: usize) -> Result<Vector<T>> {
    if x == T::zero() {
        return Err(Error::ZeroArgument);
    }
    let mut memo = HashMap::new();
    let mut idx = vec![0u32; spec.branches.len()];
    orbit_rec(spec, f, x, n, &mut idx, &mut memo)
}

fn orbit_rec<T: Scalar>(
    spec: &IterationSpec<T>,
    f: &impl Evaluate<T>,
    x: T,
    depth: usize,
    idx: &mut Vec<u32>,
    memo: &mut HashMap<(usize, Vec<u32>), Vector<T>>,
) -> Result<Vector<T>> {
    if let Some(v) = memo.get(&(depth, idx.clone())) {
        return Ok(v.clone());
    }
    let point = spec
        .branches
        .iter()
        .zip(idx.iter())
        .fold(x, |p, (b, &k)| p * b.scale.powi(k as i32));
    let out = if depth == 0 {
        f.value(point)?
    } else {
        let mut acc: Option<Vector<T>> = None;
        for i in 0..spec.branches.len() {
            idx[i] += 1;
            let v = orbit_rec(spec, f, x, depth - 1, idx, memo)?;
            idx[i] -= 1;
            let c = spec.branches[i].coef;
            acc = Some(match acc {
                None => v.scale(c),
                Some(a) => a.axpy(c, &v),
            });
        }
        acc.expect("nonempty spec")
    };
    memo.insert((depth, idx.clone()), out.clone());
    Ok(out)
}

/// `(Tⁿf)(x)` by plain `jⁿ`-leaf recursion.
pub fn direct_apply<T: Scalar>(spec: &IterationSpec<T>, f: &impl Evaluate<T>, x: T, n: usize) -> Result<Vector<T>> {
    if n == 0 {
        return f.value(x);
    }
    let mut acc: Option<Vector<T>> = None;
    for b in &spec.branches {
        let v = direct_apply(spec, f, b.scale * x, n - 1)?;
        acc = Some(match acc {
            None => v.scale(b.coef),
            Some(a) => a.axpy(b.coef, &v),
        });
    }
    Ok(acc.expect("nonempty spec"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct ErrorTerm<T> {
    pub c: T,
    pub s: T,
}

/// `ε(x) = weight · Σ c |x|^s`, for one fixed second argument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct ScalarErrorFn<T> {
    pub terms: Vec<ErrorTerm<T>>,
    #[serde(default = "T::one")]
    pub weight: T,
}

impl<T: Scalar> ScalarErrorFn<T> {
    pub fn new(terms: Vec<ErrorTerm<T>>, weight: T) -> Result<Self> {
        for t in &terms {
            if !(t.c.is_finite() && t.c >= T::zero() && t.s.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "error term needs finite c >= 0 and finite s, got c = {}, s = {}",
                    t.c, t.s
                )));
            }
        }
        if !(weight.is_finite() && weight >= T::zero()) {
            return Err(out_of_range("weight", "[0,inf)", to_f64(weight)));
        }
        Ok(Self { terms, weight })
    }

    pub fn zero() -> Self {
        Self {
            terms: Vec::new(),
            weight: T::one(),
        }
    }

    pub fn constant(c: T) -> Self {
        Self::power(c, T::zero())
    }

    pub fn power(c: T, s: T) -> Self {
        Self {
            terms: vec![ErrorTerm { c, s }],
            weight: T::one(),
        }
    }

    pub fn eval(&self, x: T) -> Result<T> {
        if x == T::zero() {
            return Err(Error::ZeroArgument);
        }
        Ok(self.weight * self.terms.iter().map(|t| t.c * x.abs().powf(t.s)).sum::<T>())
    }
}

/// Error bound as a function of the witness `y`.
pub trait EpsilonSource<T: Scalar>: Sync {
    fn for_witness(&self, y: &Vector<T>) -> Result<ScalarErrorFn<T>>;
}

impl<T: Scalar> EpsilonSource<T> for ScalarErrorFn<T> {
    fn for_witness(&self, _y: &Vector<T>) -> Result<ScalarErrorFn<T>> {
        Ok(self.clone())
    }
}

impl<T: Scalar, F: Fn(&Vector<T>) -> Result<ScalarErrorFn<T>> + Sync> EpsilonSource<T> for F {
    fn for_witness(&self, y: &Vector<T>) -> Result<ScalarErrorFn<T>> {
        self(y)
    }
}

/// `(Λδ)(x)` and the closed-form image `Λδ`.
pub fn apply_lambda<T: Scalar>(
    spec: &IterationSpec<T>,
    delta: &ScalarErrorFn<T>,
    x: T,
) -> Result<(T, ScalarErrorFn<T>)> {
    if x == T::zero() {
        return Err(Error::ZeroArgument);
    }
    let value = spec
        .branches
        .iter()
        .map(|b| Ok(b.lipschitz * delta.eval(b.scale * x)?))
        .sum::<Result<T>>()?;
    Ok((value, lambda_power(spec, delta, 1)))
}

/// `Λⁿδ` in closed form.
pub fn lambda_power<T: Scalar>(spec: &IterationSpec<T>, delta: &ScalarErrorFn<T>, n: usize) -> ScalarErrorFn<T> {
    ScalarErrorFn {
        terms: delta
            .terms
            .iter()
            .map(|t| ErrorTerm {
                c: t.c * spec.lambda_multiplier(t.s).powi(n as i32),
                s: t.s,
            })
            .collect(),
        weight: delta.weight,
    }
}

/// `(Λⁿδ)(x)` by direct recursion (reference route).
pub fn lambda_numeric<T: Scalar>(spec: &IterationSpec<T>, delta: &ScalarErrorFn<T>, x: T, n: usize) -> Result<T> {
    if n == 0 {
        return delta.eval(x);
    }
    spec.branches
        .iter()
        .map(|b| Ok(b.lipschitz * lambda_numeric(spec, delta, b.scale * x, n - 1)?))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EpsilonStar<T> {
    pub value: T,
    pub converged: bool,
    pub terms_used: usize,
}

/// `ε*(x) = Σ_{n≥0} (Λⁿε)(x)^θ`, summed until a term drops below
/// `tol · value`. Reported as not converged after `n_max` terms or when the
/// terms fail to decrease eight times in a row.
pub fn epsilon_star<T: Scalar>(
    spec: &IterationSpec<T>,
    eps: &ScalarErrorFn<T>,
    x: T,
    theta: T,
    tol: T,
    n_max: usize,
) -> Result<EpsilonStar<T>> {
    if !(theta > T::zero() && theta <= T::one()) {
        return Err(out_of_range("theta", "(0,1]", to_f64(theta)));
    }
    if n_max == 0 {
        return Err(Error::InvalidParameter("n_max must be at least 1".into()));
    }
    if x == T::zero() {
        return Err(Error::ZeroArgument);
    }
    // current per-term values of Λⁿε at x, and their per-step multipliers
    let mut parts: Vec<(T, T)> = eps
        .terms
        .iter()
        .map(|t| (eps.weight * t.c * x.abs().powf(t.s), spec.lambda_multiplier(t.s)))
        .collect();
    let mut value = T::zero();
    let mut prev: Option<T> = None;
    let mut run = 0;
    for n in 0..n_max {
        let term = parts.iter().map(|p| p.0).sum::<T>().powf(theta);
        value += term;
        if term.is_zero() || (n > 0 && term < tol * value) {
            return Ok(EpsilonStar {
                value,
                converged: true,
                terms_used: n + 1,
            });
        }
        if let Some(p) = prev {
            run = if term >= p { run + 1 } else { 0 };
            if run >= DIVERGENCE_RUN {
                return Ok(EpsilonStar {
                    value,
                    converged: false,
                    terms_used: n + 1,
                });
            }
        }
        prev = Some(term);
        for p in parts.iter_mut() {
            p.0 *= p.1;
        }
    }
    Ok(EpsilonStar {
        value,
        converged: false,
        terms_used: n_max,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GeometricBound<T> {
    /// `ε^θ / (1 − q^θ)`
    pub bound: T,
    /// `ε^θ / (1 − q)^θ`
    pub uniqueness_bound: T,
    /// Whether `bound ≤ uniqueness_bound`. This fails whenever θ < 1 and
    /// 0 < q < 1, because then `1 − q^θ < (1 − q)^θ`.
    pub ordering_holds: bool,
}

/// Closed forms for the geometric case `Λε = qε`.
pub fn geometric_bound<T: Scalar>(eps_value: T, q: T, theta: T) -> Result<GeometricBound<T>> {
    if !(q >= T::zero() && q < T::one()) {
        return Err(out_of_range("q", "[0,1)", to_f64(q)));
    }
    if !(theta > T::zero() && theta <= T::one()) {
        return Err(out_of_range("theta", "(0,1]", to_f64(theta)));
    }
    if !(eps_value >= T::zero() && eps_value.is_finite()) {
        return Err(out_of_range("eps_value", "[0,inf)", to_f64(eps_value)));
    }
    let e = eps_value.powf(theta);
    let bound = e / (T::one() - q.powf(theta));
    let uniqueness_bound = e / (T::one() - q).powf(theta);
    Ok(GeometricBound {
        bound,
        uniqueness_bound,
        ordering_holds: bound <= uniqueness_bound,
    })
}

/// Smallest `M` with `Σ (qⁿε)^θ ≤ (M Σ qⁿε)^θ`: `(1 − q) / (1 − q^θ)^{1/θ}`.
pub fn min_uniqueness_m<T: Scalar>(q: T, theta: T) -> Result<T> {
    geometric_bound(T::one(), q, theta)?;
    Ok((T::one() - q) / (T::one() - q.powf(theta)).powf(T::one() / theta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct UniquenessCheck<T> {
    pub holds: bool,
    pub divergent: bool,
    /// Certified upper bound on `Σ (Λⁿε)^θ`.
    pub lhs: T,
    /// `(M Σ Λⁿε)^θ`
    pub rhs: T,
}

/// Tests `Σ (Λⁿε)^θ ≤ (M Σ Λⁿε)^θ` at `x`.
///
/// Each power term is a geometric sequence under Λ, so the plain series has
/// the closed form `Σ_k C_k / (1 − μ_k)`. The θ-series is summed for up to
/// `n_max` terms and its tail bounded by `Σ_k C_k^θ μ_k^{θN} / (1 − μ_k^θ)`,
/// which is valid because `t ↦ t^θ` is subadditive.
pub fn check_uniqueness_condition<T: Scalar>(
    spec: &IterationSpec<T>,
    eps: &ScalarErrorFn<T>,
    x: T,
    theta: T,
    m: T,
    n_max: usize,
) -> Result<UniquenessCheck<T>> {
    if !(m > T::zero()) {
        return Err(out_of_range("M", "(0,inf)", to_f64(m)));
    }
    if !(theta > T::zero() && theta <= T::one()) {
        return Err(out_of_range("theta", "(0,1]", to_f64(theta)));
    }
    if x == T::zero() {
        return Err(Error::ZeroArgument);
    }
    let parts: Vec<(T, T)> = eps
        .terms
        .iter()
        .map(|t| (eps.weight * t.c * x.abs().powf(t.s), spec.lambda_multiplier(t.s)))
        .filter(|p| p.0 > T::zero())
        .collect();
    if parts.iter().any(|p| p.1 >= T::one()) {
        return Ok(UniquenessCheck {
            holds: false,
            divergent: true,
            lhs: T::infinity(),
            rhs: T::infinity(),
        });
    }
    let plain: T = parts.iter().map(|&(c, mu)| c / (T::one() - mu)).sum();
    let mut cur: Vec<T> = parts.iter().map(|p| p.0).collect();
    let mut partial = T::zero();
    let mut n = 0;
    while n < n_max {
        let term = cur.iter().copied().sum::<T>().powf(theta);
        partial += term;
        n += 1;
        for (c, p) in cur.iter_mut().zip(&parts) {
            *c *= p.1;
        }
        if term <= lit::<T>(1e-17) * partial {
            break;
        }
    }
    let tail: T = cur
        .iter()
        .zip(&parts)
        .map(|(&c, &(_, mu))| c.powf(theta) / (T::one() - mu.powf(theta)))
        .sum();
    let lhs = partial + tail;
    let rhs = (m * plain).powf(theta);
    Ok(UniquenessCheck {
        holds: lhs <= rhs * (T::one() + lit(1e-12)),
        divergent: false,
        lhs,
        rhs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PsiValue<T> {
    pub x: T,
    pub value: Vector<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BoundValue<T> {
    pub x: T,
    pub witness: usize,
    pub eps_star: T,
    /// `‖φ(x) − ψ(x), y‖^θ`
    pub deviation: T,
    /// `K_observed · ε*(x, y)`
    pub bound: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FixedPointReport<T> {
    pub psi_values: Vec<PsiValue<T>>,
    pub iterations: usize,
    /// Sup step norm after each application of T.
    pub steps: Vec<T>,
    pub sup_residual: T,
    pub bound_values: Vec<BoundValue<T>>,
    /// Smallest K with `‖φ − ψ, y‖^θ ≤ K ε*` on all samples.
    pub k_observed: T,
    pub converged: bool,
    pub eps_star_converged: bool,
    /// Largest `‖Tφ − φ, y‖ / ε(x, y)`; at most 1 when the hypothesis holds.
    pub hypothesis_ratio: T,
    /// Largest `‖T^{n+1}φ − Tⁿφ, y‖ / (Λⁿε)(x, y)` for `n ≤ 8`.
    pub induction_max_ratio: T,
    pub theta: T,
    pub psi: VectorFunction<T>,
}

fn ratio<T: Scalar>(num: T, den: T) -> T {
    if den > T::zero() {
        num / den
    } else if num > T::zero() {
        T::infinity()
    } else {
        T::zero()
    }
}

/// Iterates `T` from `phi` until the sup step over samples and witnesses
/// stays below `tol` for three consecutive steps, then checks the a-priori
/// bound against `ε*` and records the smallest constant that works.
pub fn iterate<T: Scalar>(
    spec: &IterationSpec<T>,
    phi: &VectorFunction<T>,
    eps: &impl EpsilonSource<T>,
    sample_xs: &[T],
    witnesses: &[Vector<T>],
    tol: T,
    n_max: usize,
) -> Result<FixedPointReport<T>> {
    if sample_xs.iter().any(|x| x.is_zero()) {
        return Err(Error::ZeroArgument);
    }
    if witnesses.is_empty() || sample_xs.is_empty() {
        return Err(Error::InvalidParameter("need at least one sample and one witness".into()));
    }
    let space = &spec.space;
    phi.constant_part().check_dim(space.dim)?;
    let th = spec.theta()?;
    let eps_w = witnesses
        .iter()
        .map(|y| eps.for_witness(y))
        .collect::<Result<Vec<_>>>()?;

    let sup_dist = |f: &VectorFunction<T>, g: &VectorFunction<T>| -> Result<Vec<Vec<T>>> {
        sample_xs
            .par_iter()
            .map(|&x| {
                let d = &f.eval(x)? - &g.eval(x)?;
                witnesses.iter().map(|y| eval_norm(space, &d, y)).collect()
            })
            .collect()
    };

    let mut cur = phi.clone();
    let mut steps = Vec::new();
    let mut stable = 0;
    let mut converged = false;
    let mut induction = T::zero();
    let mut hypothesis = T::zero();
    for n in 0..n_max {
        let next = apply_to_function(spec, &cur);
        let dists = sup_dist(&next, &cur)?;
        if n <= INDUCTION_DEPTH {
            let lam: Vec<ScalarErrorFn<T>> = eps_w.iter().map(|e| lambda_power(spec, e, n)).collect();
            for (row, &x) in dists.iter().zip(sample_xs) {
                for (d, l) in row.iter().zip(&lam) {
                    let r = ratio(*d, l.eval(x)?);
                    induction = induction.max(r);
                    if n == 0 {
                        hypothesis = hypothesis.max(r);
                    }
                }
            }
        }
        let step = dists
            .iter()
            .flatten()
            .fold(T::zero(), |a, &d| a.max(d));
        steps.push(step);
        cur = next;
        if step <= tol {
            stable += 1;
            if stable >= STABLE_STEPS {
                converged = true;
                break;
            }
        } else {
            stable = 0;
        }
    }

    let psi = cur;
    let sup_residual = sup_dist(&apply_to_function(spec, &psi), &psi)?
        .iter()
        .flatten()
        .fold(T::zero(), |a, &d| a.max(d));

    let per_point = sample_xs
        .par_iter()
        .map(|&x| {
            let d = &phi.eval(x)? - &psi.eval(x)?;
            let mut rows = Vec::with_capacity(witnesses.len());
            for (w, (y, e)) in witnesses.iter().zip(&eps_w).enumerate() {
                let star = epsilon_star(spec, e, x, th, lit(1e-16), 100_000)?;
                let dev = eval_norm(space, &d, y)?.powf(th);
                rows.push((w, star, dev));
            }
            Ok((x, psi.eval(x)?, rows))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut k_observed = T::zero();
    let mut eps_star_converged = true;
    for (_, _, rows) in &per_point {
        for (_, star, dev) in rows {
            eps_star_converged &= star.converged;
            k_observed = k_observed.max(ratio(*dev, star.value));
        }
    }
    let mut psi_values = Vec::new();
    let mut bound_values = Vec::new();
    for (x, v, rows) in per_point {
        psi_values.push(PsiValue { x, value: v });
        for (w, star, dev) in rows {
            bound_values.push(BoundValue {
                x,
                witness: w,
                eps_star: star.value,
                deviation: dev,
                bound: k_observed * star.value,
            });
        }
    }

    Ok(FixedPointReport {
        psi_values,
        iterations: steps.len(),
        steps,
        sup_residual,
        bound_values,
        k_observed,
        converged: converged && sup_residual <= tol,
        eps_star_converged,
        hypothesis_ratio: hypothesis,
        induction_max_ratio: induction,
        theta: th,
        psi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::function::AbsMode;

    fn cross() -> SpaceDescriptor<f64> {
        SpaceDescriptor::cross_2norm(3).unwrap()
    }

    fn halving() -> IterationSpec<f64> {
        IterationSpec::from_parts(cross(), &[(2.0, 0.5, 1)]).unwrap()
    }

    #[test]
    fn identity_spec() {
        let spec = IterationSpec::from_parts(cross(), &[(1.0, 1.0, 1)]).unwrap();
        let f = VectorFunction::power(1.5, 3.0, AbsMode::Signed, Vector::basis(3, 0));
        assert_eq!(apply_t(&spec, &f, -0.7).unwrap(), f.eval(-0.7).unwrap());
        assert!(matches!(apply_t(&spec, &f, 0.0), Err(Error::ZeroArgument)));
    }

    #[test]
    fn rejects_bad_lipschitz() {
        let mut b = Branch::new(&cross(), 2.0, 0.5, 1);
        b.lipschitz = 0.4;
        assert!(IterationSpec::new(cross(), vec![b]).is_err());
        assert!(IterationSpec::new(cross(), vec![]).is_err());
        assert!(IterationSpec::from_parts(cross(), &[(0.0, 1.0, 1)]).is_err());
    }

    #[test]
    fn lambda_multiplier_example() {
        let spec = IterationSpec::from_parts(cross(), &[(2.0, 1.0, 1)]).unwrap();
        let delta = ScalarErrorFn::power(1.0, -3.0);
        let (v, img) = apply_lambda(&spec, &delta, 1.0).unwrap();
        assert_eq!(v, 0.125);
        assert_eq!(img.terms[0].c, 0.125);
        let (z, _) = apply_lambda(&spec, &ScalarErrorFn::zero(), 3.0).unwrap();
        assert_eq!(z, 0.0);
    }

    #[test]
    fn epsilon_star_geometric() {
        let e = ScalarErrorFn::constant(1.0);
        let s = epsilon_star(&halving(), &e, 1.0, 1.0, 1e-16, 1000).unwrap();
        assert!(s.converged);
        assert!((s.value - 2.0).abs() < 1e-12);

        let zero_q = IterationSpec::from_parts(cross(), &[(2.0, 0.0, 1)]).unwrap();
        let s = epsilon_star(&zero_q, &ScalarErrorFn::constant(3.0), 1.0, 0.5, 1e-16, 1000).unwrap();
        assert!(s.converged);
        assert_eq!(s.value, 3f64.sqrt());

        let one_q = IterationSpec::from_parts(cross(), &[(2.0, 1.0, 1)]).unwrap();
        let s = epsilon_star(&one_q, &e, 1.0, 1.0, 1e-16, 1000).unwrap();
        assert!(!s.converged);
    }

    #[test]
    fn geometric_bound_examples() {
        assert_eq!(geometric_bound(1.0, 0.5, 1.0).unwrap().bound, 2.0);
        assert_eq!(geometric_bound(1.0, 0.0, 0.3).unwrap().bound, 1.0);
        let g = geometric_bound(2.0, 0.5, 0.5).unwrap();
        assert!((g.bound - 4.828_427_12_f64).abs() < 1e-8);
        assert!(!g.ordering_holds);
        assert!(geometric_bound(1.0, 0.5, 1.0).unwrap().ordering_holds);
        assert!(geometric_bound(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn uniqueness_examples() {
        let e = ScalarErrorFn::constant(1.0);
        let spec = halving();
        assert!(check_uniqueness_condition(&spec, &e, 1.0, 1.0, 1.0, 200).unwrap().holds);
        for (m, want) in [(1.0, false), (3.0, false), (6.0, true)] {
            let u = check_uniqueness_condition(&spec, &e, 1.0, 0.5, m, 200).unwrap();
            assert_eq!(u.holds, want, "M = {m}: {u:?}");
        }
        assert!(check_uniqueness_condition(&spec, &ScalarErrorFn::zero(), 1.0, 0.5, 1.0, 10).unwrap().holds);
        let m = min_uniqueness_m(0.5, 0.5).unwrap();
        assert!((m - 5.828_427_12_f64).abs() < 1e-8);
        let one_q = IterationSpec::from_parts(cross(), &[(2.0, 1.0, 1)]).unwrap();
        let u = check_uniqueness_condition(&one_q, &e, 1.0, 1.0, 1.0, 10).unwrap();
        assert!(u.divergent && !u.holds);
    }

    #[test]
    fn orbit_and_direct_agree() {
        let spec = IterationSpec::from_parts(cross(), &[(2.0, 0.5, 1), (-1.5, 0.25, 2), (0.7, -0.1, 2)]).unwrap();
        let f = VectorFunction::power(1.0, -1.0, AbsMode::Signed, Vector::basis(3, 1))
            .plus(&VectorFunction::power(0.3, 2.0, AbsMode::Abs, Vector::basis(3, 2)))
            .unwrap();
        for n in 0..6 {
            let a = orbit_apply(&spec, &f, 1.3, n).unwrap();
            let b = direct_apply(&spec, &f, 1.3, n).unwrap();
            let c = t_power(&spec, &f, n).eval(1.3).unwrap();
            let scale = b.norm_inf().max(1e-300);
            assert!((&a - &b).norm_inf() <= 1e-12 * scale);
            assert!((&c - &b).norm_inf() <= 1e-12 * scale);
        }
    }

    #[test]
    fn iterate_geometric_case() {
        let spec = halving();
        let d1 = Vector::basis(3, 0);
        let w = Vector::from_f64(&[0.0, 1.0, 2.0]).unwrap();
        let phi = VectorFunction::power(1.0, 1.0, AbsMode::Abs, d1.clone())
            .plus(&VectorFunction::constant(w.clone()))
            .unwrap();
        let space = cross();
        let eps = |y: &Vector<f64>| -> Result<ScalarErrorFn<f64>> {
            Ok(ScalarErrorFn::constant(0.5 * eval_norm(&space, &w, y)?))
        };
        let xs = [0.5, -1.0, 2.0];
        let ws = [Vector::basis(3, 0), Vector::basis(3, 1), Vector::from_f64(&[1., 1., 1.]).unwrap()];
        let rep = iterate(&spec, &phi, &eps, &xs, &ws, 1e-12, 200).unwrap();
        assert!(rep.converged);
        assert!(rep.hypothesis_ratio <= 1.0 + 1e-12);
        assert!(rep.induction_max_ratio <= 1.0 + 1e-9);
        assert!(rep.k_observed <= 1.0 + 1e-6);
        for p in &rep.psi_values {
            assert!((&p.value - &d1.scale(p.x.abs())).norm_inf() < 1e-11);
        }
    }
}
