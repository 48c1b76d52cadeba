//! The radical equation
//!
//! ```text
//! f(ⁿ√(a xⁿ + b yⁿ)) + f(ⁿ√(a xⁿ − b yⁿ)) = c f(x) + d f(y)
//! ```
//!
//! on pairs with `ⁿ√a x ≠ ±ⁿ√b y`, for odd `n` (default 3). Its continuous
//! solutions are `f(x) = θ x^{2n} + w`, subject to `a² = c/2`, `b² = d/2`,
//! and `c + d = 2` whenever `w ≠ 0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::{AbsMode, Evaluate, VectorFunction};
use crate::scalar::{lit, real_root, rel_diff, to_f64, Scalar};
use crate::vector::Vector;

/// Relative width of the excluded band around `ⁿ√a x = ±ⁿ√b y`.
pub const EXCLUSION: f64 = 1e-6;
/// Relative tolerance of the coefficient constraints in [`make_solution`].
pub const CONSTRAINT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams<T>", into = "RawParams<T>", bound = "T: Scalar")]
pub struct EquationParams<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
    pub root_n: u32,
}

impl<T: Scalar> EquationParams<T> {
    pub fn new(a: T, b: T, c: T, d: T) -> Result<Self> {
        Self::with_root(a, b, c, d, 3)
    }

    pub fn with_root(a: T, b: T, c: T, d: T, root_n: u32) -> Result<Self> {
        for (name, v) in [("a", a), ("b", b), ("c", c), ("d", d)] {
            if !v.is_finite() || v.is_zero() {
                return Err(Error::InvalidParameter(format!("{name} must be finite and nonzero, got {v}")));
            }
        }
        if root_n < 3 || root_n.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!("root_n must be odd and at least 3, got {root_n}")));
        }
        Ok(Self { a, b, c, d, root_n })
    }

    fn n(&self) -> i32 {
        self.root_n as i32
    }

    /// Degree `2n` of the continuous solutions.
    pub fn solution_degree(&self) -> T {
        lit((2 * self.root_n) as f64)
    }

    /// The two arguments `ⁿ√(a xⁿ ± b yⁿ)`.
    pub fn arguments(&self, x: T, y: T) -> (T, T) {
        let ax = self.a * x.powi(self.n());
        let by = self.b * y.powi(self.n());
        (real_root(ax + by, self.root_n), real_root(ax - by, self.root_n))
    }

    /// `Err(Inadmissible)` if `x = 0`, `y = 0` or the pair lies in the
    /// excluded band around `ⁿ√a x = ±ⁿ√b y`.
    pub fn check_admissible(&self, x: T, y: T) -> Result<()> {
        let fail = |constraint: String| Error::Inadmissible {
            x: to_f64(x),
            y: to_f64(y),
            constraint,
        };
        if x.is_zero() || y.is_zero() {
            return Err(fail("x and y must be nonzero".into()));
        }
        let n = self.root_n;
        let p = real_root(self.a, n) * x;
        let q = real_root(self.b, n) * y;
        let delta = lit::<T>(EXCLUSION) * p.abs().max(q.abs());
        if (p - q).abs() < delta {
            return Err(fail(format!("root{n}(a) x = root{n}(b) y within {}", to_f64(delta))));
        }
        if (p + q).abs() < delta {
            return Err(fail(format!("root{n}(a) x = -root{n}(b) y within {}", to_f64(delta))));
        }
        Ok(())
    }

    pub fn is_admissible(&self, x: T, y: T) -> bool {
        self.check_admissible(x, y).is_ok()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct RawParams<T> {
    a: T,
    b: T,
    c: T,
    d: T,
    #[serde(default = "default_root")]
    root_n: u32,
}

fn default_root() -> u32 {
    3
}

impl<T: Scalar> TryFrom<RawParams<T>> for EquationParams<T> {
    type Error = Error;

    fn try_from(r: RawParams<T>) -> Result<Self> {
        Self::with_root(r.a, r.b, r.c, r.d, r.root_n)
    }
}

impl<T: Scalar> From<EquationParams<T>> for RawParams<T> {
    fn from(e: EquationParams<T>) -> Self {
        RawParams {
            a: e.a,
            b: e.b,
            c: e.c,
            d: e.d,
            root_n: e.root_n,
        }
    }
}

/// Residual and the largest of the four term magnitudes (sup norm).
pub fn residual_with_scale<T: Scalar>(
    eq: &EquationParams<T>,
    f: &impl Evaluate<T>,
    x: T,
    y: T,
) -> Result<(Vector<T>, T)> {
    let (p, m) = eq.arguments(x, y);
    let fp = f.value(p)?;
    let fm = f.value(m)?;
    let fx = f.value(x)?.scale(eq.c);
    let fy = f.value(y)?.scale(eq.d);
    let scale = [&fp, &fm, &fx, &fy]
        .iter()
        .fold(T::zero(), |s, v| s.max(v.norm_inf()));
    Ok((&(&(&fp + &fm) - &fx) - &fy, scale))
}

/// `LHS − RHS` on an admissible pair.
pub fn residual<T: Scalar>(eq: &EquationParams<T>, f: &impl Evaluate<T>, x: T, y: T) -> Result<Vector<T>> {
    eq.check_admissible(x, y)?;
    Ok(residual_with_scale(eq, f, x, y)?.0)
}

/// `LHS − RHS` without the admissibility test; `f` may then be evaluated at 0.
pub fn residual_raw<T: Scalar>(eq: &EquationParams<T>, f: &impl Evaluate<T>, x: T, y: T) -> Result<Vector<T>> {
    Ok(residual_with_scale(eq, f, x, y)?.0)
}

/// `LHS − RHS − F(x, y)`.
pub fn residual_inhom<T: Scalar>(
    eq: &EquationParams<T>,
    f: &impl Evaluate<T>,
    forcing: impl Fn(T, T) -> Result<Vector<T>>,
    x: T,
    y: T,
) -> Result<Vector<T>> {
    Ok(&residual(eq, f, x, y)? - &forcing(x, y)?)
}

/// `f(x) = θ x^{2n} · direction + w`.
///
/// Fails with the list of violated constraints among `a^2 = c/2`,
/// `b^2 = d/2` (only when `θ ≠ 0`) and `c + d = 2` (only when `w ≠ 0`).
pub fn make_solution<T: Scalar>(
    eq: &EquationParams<T>,
    theta_coef: T,
    w: &Vector<T>,
    direction: &Vector<T>,
) -> Result<VectorFunction<T>> {
    direction.check_dim(w.dim())?;
    let failed = solution_constraints(eq, theta_coef, w);
    if !failed.is_empty() {
        return Err(Error::NoExactSolution { failed });
    }
    VectorFunction::power(theta_coef, eq.solution_degree(), AbsMode::Abs, direction.clone())
        .plus(&VectorFunction::constant(w.clone()))
}

/// Names of the violated solution constraints (empty if none).
pub fn solution_constraints<T: Scalar>(eq: &EquationParams<T>, theta_coef: T, w: &Vector<T>) -> Vec<String> {
    let tol: T = lit(CONSTRAINT_TOL);
    let two: T = lit(2.0);
    let mut failed = Vec::new();
    if !theta_coef.is_zero() {
        if rel_diff(eq.a * eq.a, eq.c / two, T::min_positive_value()) > tol {
            failed.push("a^2 = c/2".to_string());
        }
        if rel_diff(eq.b * eq.b, eq.d / two, T::min_positive_value()) > tol {
            failed.push("b^2 = d/2".to_string());
        }
    }
    if !w.is_zero() && !constants_survive(eq) {
        failed.push("c + d = 2".to_string());
    }
    failed
}

/// Whether `c + d = 2`, i.e. constant functions solve the equation.
pub fn constants_survive<T: Scalar>(eq: &EquationParams<T>) -> bool {
    rel_diff(eq.c + eq.d, lit(2.0), T::one()) <= lit(CONSTRAINT_TOL)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LawDeviation<T> {
    pub law: String,
    /// Largest relative deviation over the grid.
    pub max_deviation: T,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct StructureReport<T> {
    /// True when `c + d = 2`; the laws are then checked on `f − f(0)`,
    /// with `f(0)` taken as the constant part of `f`.
    pub constant_removed: bool,
    pub laws: Vec<LawDeviation<T>>,
    pub passed: bool,
}

/// Checks evenness, the three scaling laws and (for `x > 0`) the
/// homogeneity law `f(x) = x^{2n} f(1)` on `grid`.
pub fn check_structure<T: Scalar>(
    eq: &EquationParams<T>,
    f: &VectorFunction<T>,
    grid: &[T],
    tol: T,
) -> Result<StructureReport<T>> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("grid must be nonempty".into()));
    }
    if grid.iter().any(|x| x.is_zero()) {
        return Err(Error::ZeroArgument);
    }
    let constant_removed = constants_survive(eq);
    let g = if constant_removed {
        f.without_constant()
    } else {
        f.clone()
    };
    let n = eq.root_n;
    let two: T = lit(2.0);
    let deg = eq.solution_degree();
    let g1 = g.eval(T::one())?;

    let dev = |lhs: Vector<T>, rhs: Vector<T>| -> T {
        let scale = lhs.norm_inf().max(rhs.norm_inf());
        if scale.is_zero() {
            T::zero()
        } else {
            (&lhs - &rhs).norm_inf() / scale
        }
    };

    let mut laws: Vec<(String, T)> = vec![
        ("evenness".into(), T::zero()),
        ("scale_a".into(), T::zero()),
        ("scale_b".into(), T::zero()),
        ("scale_ab".into(), T::zero()),
        ("sextic".into(), T::zero()),
    ];
    let ra = real_root(eq.a, n);
    let rb = real_root(eq.b, n);
    let rab = real_root(eq.a * eq.b, n);
    for &x in grid {
        let gx = g.eval(x)?;
        let cands = [
            dev(g.eval(-x)?, gx.clone()),
            dev(g.eval(ra * x)?, gx.scale(eq.c / two)),
            dev(g.eval(rb * x)?, gx.scale(eq.d / two)),
            dev(g.eval(rab * x)?, gx.scale(eq.c * eq.d / (two * two))),
            if x > T::zero() {
                dev(gx.clone(), g1.scale(x.powf(deg)))
            } else {
                T::zero()
            },
        ];
        for (l, c) in laws.iter_mut().zip(cands) {
            l.1 = l.1.max(c);
        }
    }
    let laws: Vec<LawDeviation<T>> = laws
        .into_iter()
        .map(|(law, d)| LawDeviation {
            law,
            max_deviation: d,
            passed: d <= tol,
        })
        .collect();
    Ok(StructureReport {
        constant_removed,
        passed: laws.iter().all(|l| l.passed),
        laws,
    })
}

/// Residual of the associated additive-argument equation
/// `g(ax+by) + g(ax−by) − c g(x) − d g(y)`, with its term scale.
pub fn quadratic_residual<T: Scalar>(
    eq: &EquationParams<T>,
    g: &impl Evaluate<T>,
    x: T,
    y: T,
) -> Result<(Vector<T>, T)> {
    let p = g.value(eq.a * x + eq.b * y)?;
    let m = g.value(eq.a * x - eq.b * y)?;
    let gx = g.value(x)?.scale(eq.c);
    let gy = g.value(y)?.scale(eq.d);
    let scale = [&p, &m, &gx, &gy]
        .iter()
        .fold(T::zero(), |s, v| s.max(v.norm_inf()));
    Ok((&(&(&p + &m) - &gx) - &gy, scale))
}

/// `count` admissible pairs with `|x|, |y|` uniform in `[lo, hi]` and random
/// signs; inadmissible draws are rejected.
pub fn random_pairs<T: Scalar>(eq: &EquationParams<T>, count: usize, lo: f64, hi: f64, seed: u64) -> Vec<(T, T)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let draw = |rng: &mut ChaCha8Rng| -> T {
        let m: f64 = rng.gen_range(lo..=hi);
        lit(if rng.gen::<bool>() { m } else { -m })
    };
    while out.len() < count {
        let x = draw(&mut rng);
        let y = draw(&mut rng);
        if eq.is_admissible(x, y) {
            out.push((x, y));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ResidualSample<T> {
    pub x: T,
    pub y: T,
    /// Zero vector for inadmissible pairs.
    pub value: Vector<T>,
    /// Euclidean length of `value`.
    pub residual_norm: T,
    pub gamma_value: Option<T>,
    pub admissible: bool,
}

/// Residuals on the product grid `xs × ys`; inadmissible pairs are kept with
/// `admissible = false`.
pub fn residual_grid<T: Scalar>(
    eq: &EquationParams<T>,
    f: &impl Evaluate<T>,
    dim: usize,
    xs: &[T],
    ys: &[T],
    gamma: Option<&dyn Fn(T, T) -> Result<T>>,
) -> Result<Vec<ResidualSample<T>>> {
    let mut out = Vec::with_capacity(xs.len() * ys.len());
    for &x in xs {
        for &y in ys {
            let admissible = eq.is_admissible(x, y);
            let value = if admissible {
                residual(eq, f, x, y)?
            } else {
                Vector::zeros(dim)
            };
            let gamma_value = match gamma {
                Some(g) if admissible => Some(g(x, y)?),
                _ => None,
            };
            out.push(ResidualSample {
                x,
                y,
                residual_norm: value.norm2(),
                value,
                gamma_value,
                admissible,
            });
        }
    }
    Ok(out)
}
