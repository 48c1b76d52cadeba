//! End-to-end hyperstability experiment: scan `M₀`, recover `Q_m` from a
//! (possibly perturbed) input, and check the residual and the a-priori bound.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envelope::theta;
use crate::error::{out_of_range, Error, Result};
use crate::fixedpoint::{apply_to_function, iterate, lambda_power, IterationSpec};
use crate::function::{AbsMode, VectorFunction};
use crate::radical::{make_solution, random_pairs, residual, residual_with_scale, EquationParams, EXCLUSION};
use crate::sampling::derive_seed;
use crate::scalar::{lit, real_root, to_f64, Scalar};
use crate::spaces::{eval_norm, is_dependent, SpaceDescriptor, DEPENDENT_TOL};
use crate::vector::Vector;

use super::model::{constants, epsilon_m, find_m0, radical_spec, theorem_bound, Component, ErrorModel, Feasibility, GMap, HyperstabConstants, M0Scan};

/// Relative slack on the pointwise bound check.
pub const BOUND_SLACK: f64 = 1e-9;
/// Residual of `Q_m` relative to the equation's term scale.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Orders at which `Λⁿε_m ≤ Pⁿ σ [h₁h₂ + h₃ + h₄]` is checked.
pub const INDUCTIVE_DEPTH: usize = 8;
/// Relative distance to the excluded diagonal for near-diagonal probes.
const NEAR_DIAGONAL: (f64, f64) = (2.0 * EXCLUSION, 1e-3);

pub const NO_EXACT_SOLUTION: &str = "no exact solution; experiment will use projection f₀ = 0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct ModelSection<T> {
    pub components: Vec<Component<T>>,
    #[serde(default)]
    pub g_map: GMap<T>,
}

/// `f₀(x) = θ x^{2n} · direction + w`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct SolutionSection<T> {
    #[serde(default = "T::one")]
    pub theta: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vector<T>>,
    /// Defaults to the last basis vector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vector<T>>,
}

/// `η |x|^{n r} · direction` with `r < 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct Perturbation<T> {
    pub eta: T,
    pub r: T,
    /// Defaults to the first basis vector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vector<T>>,
}

/// `count` evenly spaced points in `[lo, hi]`, mirrored to the negative axis
/// when `symmetric`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct GridSection<T> {
    pub lo: T,
    pub hi: T,
    pub count: usize,
    #[serde(default = "yes")]
    pub symmetric: bool,
}

fn yes() -> bool {
    true
}

impl<T: Scalar> GridSection<T> {
    pub fn points(&self) -> Result<Vec<T>> {
        if !(self.lo > T::zero() && self.hi >= self.lo && self.hi.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "grid needs 0 < lo <= hi < inf, got lo = {}, hi = {}",
                self.lo, self.hi
            )));
        }
        let pos: Vec<T> = match self.count {
            0 => Vec::new(),
            1 => vec![self.lo],
            n => (0..n)
                .map(|i| self.lo + (self.hi - self.lo) * lit::<T>(i as f64) / lit::<T>((n - 1) as f64))
                .collect(),
        };
        let mut out: Vec<T> = if self.symmetric {
            pos.iter().rev().map(|&x| -x).collect()
        } else {
            Vec::new()
        };
        out.extend(pos);
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MRange {
    pub max: u32,
    /// Values of `m` to run; defaults to every member of `M₀` up to `max`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub select: Option<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct Tolerances<T> {
    #[serde(default = "default_iteration_tol")]
    pub iteration: T,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_residual_pairs")]
    pub residual_pairs: usize,
    #[serde(default = "default_near_diagonal_pairs")]
    pub near_diagonal_pairs: usize,
}

fn default_iteration_tol<T: Scalar>() -> T {
    lit(1e-12)
}

fn default_n_max() -> usize {
    200
}

fn default_residual_pairs() -> usize {
    1000
}

fn default_near_diagonal_pairs() -> usize {
    200
}

impl<T: Scalar> Default for Tolerances<T> {
    fn default() -> Self {
        Self {
            iteration: default_iteration_tol(),
            n_max: default_n_max(),
            residual_pairs: default_residual_pairs(),
            near_diagonal_pairs: default_near_diagonal_pairs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct ExperimentConfig<T> {
    pub space: SpaceDescriptor<T>,
    /// Space `Y` of the error model; defaults to `space`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aux_space: Option<SpaceDescriptor<T>>,
    pub equation: EquationParams<T>,
    pub error_model: ModelSection<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution: Option<SolutionSection<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Perturbation<T>>,
    pub grid: GridSection<T>,
    pub m_range: MRange,
    /// Defaults to `e₁, e₂, (1, …, 1)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witnesses: Option<Vec<Vector<T>>>,
    #[serde(default)]
    pub tolerances: Tolerances<T>,
    #[serde(default)]
    pub seed: u64,
}

/// Everything derived from a config before any iteration.
#[derive(Debug, Clone)]
pub struct Prepared<T> {
    pub model: ErrorModel<T>,
    pub f0: VectorFunction<T>,
    pub f: VectorFunction<T>,
    pub grid: Vec<T>,
    pub witnesses: Vec<Vector<T>>,
    pub theta: T,
    pub warnings: Vec<String>,
}

impl<T: Scalar> ExperimentConfig<T> {
    pub fn prepare(&self) -> Result<Prepared<T>> {
        let dim = self.space.dim;
        self.space.validate()?;
        let aux = self.aux_space.clone().unwrap_or_else(|| self.space.clone());
        let n = self.error_model.components.len();
        let components: [Component<T>; 4] = self
            .error_model
            .components
            .clone()
            .try_into()
            .map_err(|_| Error::InvalidParameter(format!("error model needs exactly 4 components, got {n}")))?;
        let model = ErrorModel::new(components, aux, self.error_model.g_map.clone())?;

        let mut warnings = Vec::new();
        let sol = self.solution.clone().unwrap_or(SolutionSection {
            theta: T::one(),
            w: None,
            direction: None,
        });
        let w = sol.w.unwrap_or_else(|| Vector::zeros(dim));
        let dir = sol.direction.unwrap_or_else(|| Vector::basis(dim, dim - 1));
        w.check_dim(dim)?;
        let f0 = match make_solution(&self.equation, sol.theta, &w, &dir) {
            Ok(f) => f,
            Err(Error::NoExactSolution { failed }) => {
                warnings.push(format!("{NO_EXACT_SOLUTION} (violated: {})", failed.join(", ")));
                VectorFunction::zero(dim)
            }
            Err(e) => return Err(e),
        };
        let f = match &self.perturbation {
            None => f0.clone(),
            Some(p) => {
                if !p.eta.is_finite() {
                    return Err(Error::NonFinite("perturbation eta".into()));
                }
                if !(p.r < T::zero()) {
                    return Err(out_of_range("perturbation r", "(-inf,0)", to_f64(p.r)));
                }
                let d = p.direction.clone().unwrap_or_else(|| Vector::basis(dim, 0));
                d.check_dim(dim)?;
                let exp = lit::<T>(self.equation.root_n as f64) * p.r;
                f0.plus(&VectorFunction::power(p.eta, exp, AbsMode::Abs, d))?
            }
        };

        let witnesses = match &self.witnesses {
            Some(ws) => ws.clone(),
            None => {
                let mut ones = Vector::zeros(dim);
                for i in 0..dim {
                    ones = &ones + &Vector::basis(dim, i);
                }
                vec![Vector::basis(dim, 0), Vector::basis(dim, 1), ones]
            }
        };
        for y in &witnesses {
            y.check_dim(dim)?;
        }
        let tol: T = lit(DEPENDENT_TOL);
        let independent = witnesses
            .iter()
            .enumerate()
            .any(|(i, y)| witnesses[i + 1..].iter().any(|z| !is_dependent(y, z, tol)));
        if !independent {
            return Err(Error::InvalidParameter("witnesses must contain two linearly independent vectors".into()));
        }
        let t = &self.tolerances;
        if !(t.iteration > T::zero() && t.iteration.is_finite()) {
            return Err(out_of_range("tolerances.iteration", "(0,inf)", to_f64(t.iteration)));
        }
        if t.n_max == 0 {
            return Err(Error::InvalidParameter("tolerances.n_max must be at least 1".into()));
        }
        if self.m_range.max < 2 {
            return Err(Error::InvalidParameter(format!("m_range.max must be at least 2, got {}", self.m_range.max)));
        }
        Ok(Prepared {
            model,
            f0,
            f,
            grid: self.grid.points()?,
            witnesses,
            theta: theta(self.space.beta, self.space.kappa)?,
            warnings,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct QmRow<T> {
    pub x: T,
    pub qm: Vector<T>,
    pub f0: Vector<T>,
    /// `‖Q_m(x) − f₀(x)‖₂`
    pub abs_dev: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ResidualCheck<T> {
    pub pairs: usize,
    /// Largest `‖LHS − RHS‖∞ / term scale`.
    pub sup_ratio: T,
    pub worst: Option<(T, T)>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct QmResult<T> {
    pub m: u32,
    pub qm: VectorFunction<T>,
    pub rows: Vec<QmRow<T>>,
    pub iterations: usize,
    pub converged: bool,
    pub steps: Vec<T>,
    pub sup_abs_dev_f0: T,
    /// `sup ‖Q_m − f₀‖₂ / ‖f₀‖₂` over grid points where `f₀ ≠ 0`.
    pub sup_rel_dev_f0: T,
    pub residual: ResidualCheck<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QmOptions<T> {
    pub tol: T,
    pub n_max: usize,
    pub residual_pairs: usize,
    pub seed: u64,
}

fn sup_step<T: Scalar>(
    space: &SpaceDescriptor<T>,
    f: &VectorFunction<T>,
    g: &VectorFunction<T>,
    grid: &[T],
    witnesses: &[Vector<T>],
) -> Result<T> {
    let mut best = T::zero();
    for &x in grid {
        let d = &f.eval(x)? - &g.eval(x)?;
        for y in witnesses {
            best = best.max(eval_norm(space, &d, y)?);
        }
    }
    Ok(best)
}

/// `Q_m = lim T_mⁿ f` by closed-form term updates, stopped when the sup step
/// over grid and witnesses stays below `tol` three times in a row.
#[allow(clippy::too_many_arguments)]
pub fn compute_qm<T: Scalar>(
    eq: &EquationParams<T>,
    space: &SpaceDescriptor<T>,
    f: &VectorFunction<T>,
    f0: &VectorFunction<T>,
    m: u32,
    grid: &[T],
    witnesses: &[Vector<T>],
    opts: QmOptions<T>,
) -> Result<QmResult<T>> {
    if grid.iter().any(|x| x.is_zero()) {
        return Err(Error::ZeroArgument);
    }
    let spec = radical_spec(eq, space, m)?;
    let mut cur = f.clone();
    let mut steps = Vec::new();
    let mut stable = 0;
    let mut converged = false;
    while steps.len() < opts.n_max {
        let next = apply_to_function(&spec, &cur);
        let step = sup_step(space, &next, &cur, grid, witnesses)?;
        steps.push(step);
        cur = next;
        if step <= opts.tol {
            stable += 1;
            if stable >= 3 {
                converged = true;
                break;
            }
        } else {
            stable = 0;
        }
    }

    let mut rows = Vec::with_capacity(grid.len());
    let (mut sup_abs, mut sup_rel) = (T::zero(), T::zero());
    for &x in grid {
        let q = cur.eval(x)?;
        let z = f0.eval(x)?;
        let dev = (&q - &z).norm2();
        sup_abs = sup_abs.max(dev);
        let scale = z.norm2();
        if scale > T::zero() {
            sup_rel = sup_rel.max(dev / scale);
        }
        rows.push(QmRow {
            x,
            qm: q,
            f0: z,
            abs_dev: dev,
        });
    }

    let (lo, hi) = grid
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), &x| (l.min(to_f64(x.abs())), h.max(to_f64(x.abs()))));
    let pairs: Vec<(T, T)> = if grid.is_empty() || opts.residual_pairs == 0 {
        Vec::new()
    } else {
        random_pairs(eq, opts.residual_pairs, lo, hi.max(lo * (1.0 + 1e-9)), opts.seed)
    };
    let mut sup_ratio = T::zero();
    let mut worst = None;
    for &(x, y) in &pairs {
        let (r, scale) = residual_with_scale(eq, &cur, x, y)?;
        let ratio = if scale > T::zero() { r.norm_inf() / scale } else { T::zero() };
        if ratio > sup_ratio || worst.is_none() {
            sup_ratio = sup_ratio.max(ratio);
            worst = Some((x, y));
        }
    }
    Ok(QmResult {
        m,
        qm: cur,
        rows,
        iterations: steps.len(),
        converged,
        steps,
        sup_abs_dev_f0: sup_abs,
        sup_rel_dev_f0: sup_rel,
        residual: ResidualCheck {
            pairs: pairs.len(),
            sup_ratio,
            worst,
            passed: sup_ratio <= lit(RESIDUAL_TOL),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BoundRow<T> {
    pub x: T,
    pub witness: usize,
    /// `‖f(x) − Q_m(x), z‖^θ`
    pub deviation: T,
    /// Right-hand side with the observed `K`.
    pub bound: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MResult<T> {
    pub m: u32,
    pub constants: HyperstabConstants<T>,
    pub qm: QmResult<T>,
    /// `sup ‖f − Q_m‖₂` on the grid.
    pub sup_dev_f: T,
    /// Smallest `K` with `‖f − Q_m, z‖^θ ≤ K ε*` on grid and witnesses.
    pub k_observed: T,
    /// Largest `‖T_m f − f, z‖ / ε_m`; at most 1 when the hypothesis holds.
    pub hypothesis_ratio: T,
    pub induction_max_ratio: T,
    pub eps_star_converged: bool,
    /// Largest `Λⁿε_m / (Pⁿ σ [h₁h₂ + h₃ + h₄])` for `n ≤ 8`.
    pub inductive_bound_ratio: T,
    pub bounds: Vec<BoundRow<T>>,
    pub bound_satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TrendPoint<T> {
    pub m: u32,
    pub sup_dev_f: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NearDiagonalCheck<T> {
    pub pairs: usize,
    /// Largest `‖residual of f, z‖ / γ(x, y, z)`.
    pub max_ratio: T,
    pub worst: Option<(T, T)>,
    pub exceeds_gamma: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct UniquenessProbe<T> {
    pub m: u32,
    /// Sup over grid and witnesses of `‖Q_m[f] − Q_m[f₀], z‖`.
    pub sup_difference: T,
    pub agree: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct HyperstabReport<T> {
    pub config: ExperimentConfig<T>,
    pub feasible: bool,
    pub warnings: Vec<String>,
    pub theta: T,
    pub feasibility: Feasibility,
    pub m0: M0Scan<T>,
    pub per_m: Vec<MResult<T>>,
    pub trend: Vec<TrendPoint<T>>,
    /// Whether `sup ‖f − Q_m‖` is negligible at the largest `m` run.
    pub converges_to_f: bool,
    pub near_diagonal: NearDiagonalCheck<T>,
    pub uniqueness: Option<UniquenessProbe<T>>,
    pub all_checks_passed: bool,
}

fn run_m<T: Scalar>(cfg: &ExperimentConfig<T>, prep: &Prepared<T>, m: u32) -> Result<MResult<T>> {
    let eq = &cfg.equation;
    let space = &cfg.space;
    let tol = cfg.tolerances.iteration;
    let k = constants(eq, &prep.model, space.kappa, space.beta, m)?;
    let qm = compute_qm(
        eq,
        space,
        &prep.f,
        &prep.f0,
        m,
        &prep.grid,
        &prep.witnesses,
        QmOptions {
            tol,
            n_max: cfg.tolerances.n_max,
            residual_pairs: cfg.tolerances.residual_pairs,
            seed: derive_seed(cfg.seed, m as u64),
        },
    )?;
    let sup_dev_f = prep
        .grid
        .iter()
        .map(|&x| Ok((&prep.f.eval(x)? - &qm.qm.eval(x)?).norm2()))
        .collect::<Result<Vec<T>>>()?
        .into_iter()
        .fold(T::zero(), T::max);

    let spec = radical_spec(eq, space, m)?;
    let model = &prep.model;
    let eps = |z: &Vector<T>| epsilon_m(model, &k, z);
    let (k_observed, hypothesis_ratio, induction_max_ratio, eps_star_converged) = if prep.grid.is_empty() {
        (T::zero(), T::zero(), T::zero(), true)
    } else {
        let fp = iterate(&spec, &prep.f, &eps, &prep.grid, &prep.witnesses, tol, cfg.tolerances.n_max)?;
        (fp.k_observed, fp.hypothesis_ratio, fp.induction_max_ratio, fp.eps_star_converged)
    };

    let inductive_bound_ratio = inductive_ratio(&spec, model, &k, &prep.grid, &prep.witnesses)?;

    let mut bounds = Vec::new();
    let mut bound_satisfied = true;
    for &x in &prep.grid {
        let d = &prep.f.eval(x)? - &qm.qm.eval(x)?;
        for (w, z) in prep.witnesses.iter().enumerate() {
            let deviation = eval_norm(space, &d, z)?.powf(prep.theta);
            let bound = theorem_bound(model, &k, prep.theta, k_observed, x, z)?;
            bound_satisfied &= deviation <= bound * (T::one() + lit(BOUND_SLACK));
            bounds.push(BoundRow {
                x,
                witness: w,
                deviation,
                bound,
            });
        }
    }
    Ok(MResult {
        m,
        constants: k,
        qm,
        sup_dev_f,
        k_observed,
        hypothesis_ratio,
        induction_max_ratio,
        eps_star_converged,
        inductive_bound_ratio,
        bounds,
        bound_satisfied,
    })
}

/// Largest `Λⁿε_m(x, z) / (Pⁿ σ [h₁h₂ + h₃ + h₄](xⁿ, z))` over `n ≤ 8`.
pub fn inductive_ratio<T: Scalar>(
    spec: &IterationSpec<T>,
    model: &ErrorModel<T>,
    k: &HyperstabConstants<T>,
    xs: &[T],
    zs: &[Vector<T>],
) -> Result<T> {
    let mut worst = T::zero();
    for z in zs {
        let eps = epsilon_m(model, k, z)?;
        for n in 0..=INDUCTIVE_DEPTH {
            let lam = lambda_power(spec, &eps, n);
            for &x in xs {
                let lhs = lam.eval(x)?;
                let rhs = k.p.powi(n as i32) * k.sigma * model.bracket(x, z, k.root_n)?;
                let r = if rhs > T::zero() {
                    lhs / rhs
                } else if lhs > T::zero() {
                    T::infinity()
                } else {
                    T::zero()
                };
                worst = worst.max(r);
            }
        }
    }
    Ok(worst)
}

/// Residual of `f` against `γ` on pairs just outside the excluded diagonals.
pub fn near_diagonal_check<T: Scalar>(
    cfg: &ExperimentConfig<T>,
    prep: &Prepared<T>,
    seed: u64,
) -> Result<NearDiagonalCheck<T>> {
    let eq = &cfg.equation;
    let mut out = NearDiagonalCheck {
        pairs: 0,
        max_ratio: T::zero(),
        worst: None,
        exceeds_gamma: false,
    };
    if prep.grid.is_empty() {
        return Ok(out);
    }
    let lo = to_f64(cfg.grid.lo);
    let hi = to_f64(cfg.grid.hi).max(lo * (1.0 + 1e-9));
    let ratio_ab = real_root(eq.a / eq.b, eq.root_n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (dlo, dhi) = (NEAR_DIAGONAL.0.ln(), NEAR_DIAGONAL.1.ln());
    for _ in 0..cfg.tolerances.near_diagonal_pairs {
        let x: T = lit(rng.gen_range(lo..=hi) * if rng.gen::<bool>() { 1.0 } else { -1.0 });
        let delta: f64 = rng.gen_range(dlo..dhi).exp();
        let side: f64 = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let y = x * ratio_ab * lit::<T>(side * (1.0 + delta));
        if !eq.is_admissible(x, y) {
            continue;
        }
        out.pairs += 1;
        let r = residual(eq, &prep.f, x, y)?;
        for z in &prep.witnesses {
            let num = eval_norm(&cfg.space, &r, z)?;
            let gamma = prep.model.gamma(x, y, z, eq.root_n)?;
            let ratio = if gamma > T::zero() {
                num / gamma
            } else if num > T::zero() {
                T::infinity()
            } else {
                T::zero()
            };
            if ratio > out.max_ratio {
                out.max_ratio = ratio;
                out.worst = Some((x, y));
            }
        }
    }
    out.exceeds_gamma = out.max_ratio > T::one();
    Ok(out)
}

/// Runs the whole pipeline. Results do not depend on the thread count.
pub fn run_experiment<T: Scalar>(cfg: &ExperimentConfig<T>) -> Result<HyperstabReport<T>> {
    let prep = cfg.prepare()?;
    let mut warnings = prep.warnings.clone();
    let eq = &cfg.equation;
    let m0 = find_m0(eq, &prep.model, cfg.space.kappa, cfg.space.beta, cfg.m_range.max)?;
    let feasible = !m0.members.is_empty();
    let near_diagonal = near_diagonal_check(cfg, &prep, derive_seed(cfg.seed, u64::MAX))?;

    let selected: Vec<u32> = match &cfg.m_range.select {
        None => m0.members.clone(),
        Some(sel) => sel
            .iter()
            .copied()
            .filter(|m| {
                let ok = m0.members.contains(m);
                if !ok {
                    warnings.push(format!("m = {m} is not in M0 (scanned up to {}); skipped", cfg.m_range.max));
                }
                ok
            })
            .collect(),
    };
    let per_m: Vec<MResult<T>> = if feasible {
        selected
            .par_iter()
            .map(|&m| run_m(cfg, &prep, m))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let trend: Vec<TrendPoint<T>> = per_m
        .iter()
        .map(|r| TrendPoint {
            m: r.m,
            sup_dev_f: r.sup_dev_f,
        })
        .collect();
    let f_scale = prep
        .grid
        .iter()
        .map(|&x| Ok(prep.f.eval(x)?.norm2()))
        .collect::<Result<Vec<T>>>()?
        .into_iter()
        .fold(T::zero(), T::max);
    let converges_to_f = trend
        .last()
        .is_some_and(|t| t.sup_dev_f <= lit::<T>(RESIDUAL_TOL) * f_scale.max(T::one()));

    let uniqueness = match (&cfg.perturbation, per_m.first()) {
        (Some(_), Some(first)) => {
            let base = compute_qm(
                eq,
                &cfg.space,
                &prep.f0,
                &prep.f0,
                first.m,
                &prep.grid,
                &prep.witnesses,
                QmOptions {
                    tol: cfg.tolerances.iteration,
                    n_max: cfg.tolerances.n_max,
                    residual_pairs: 0,
                    seed: 0,
                },
            )?;
            let diff = sup_step(&cfg.space, &base.qm, &first.qm.qm, &prep.grid, &prep.witnesses)?;
            Some(UniquenessProbe {
                m: first.m,
                sup_difference: diff,
                agree: diff <= lit::<T>(2.0) * cfg.tolerances.iteration,
            })
        }
        _ => None,
    };

    let all_checks_passed = feasible
        && per_m
            .iter()
            .all(|r| r.qm.converged && r.qm.residual.passed && r.bound_satisfied)
        && uniqueness.as_ref().is_none_or(|u| u.agree);
    Ok(HyperstabReport {
        config: cfg.clone(),
        feasible,
        warnings,
        theta: prep.theta,
        feasibility: prep.model.feasibility(),
        m0,
        per_m,
        trend,
        converges_to_f,
        near_diagonal,
        uniqueness,
        all_checks_passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference(perturbed: bool) -> ExperimentConfig<f64> {
        let mut text = r#"{
            "space": {"family": "CROSS_2NORM"},
            "equation": {"a": 1, "b": 1, "c": 2, "d": 2},
            "error_model": {"components": [
                {"c": 150, "p": -1, "y": [0, 0, 1]},
                {"c": 150, "p": -1, "y": [0, 0, 1]},
                {"c": 150, "p": -2, "y": [0, 0, 1]},
                {"c": 150, "p": -2, "y": [0, 0, 1]}]},
            "grid": {"lo": 0.5, "hi": 1.5, "count": 11},
            "m_range": {"max": 10, "select": [2, 3, 5]},
            "tolerances": {"n_max": 60, "residual_pairs": 300},
            "seed": 7"#
            .to_string();
        if perturbed {
            text.push_str(r#", "perturbation": {"eta": 0.1, "r": -1}"#);
        }
        text.push('}');
        serde_json::from_str(&text).unwrap()
    }

    #[test]
    fn grid_points() {
        let g = GridSection {
            lo: 0.5,
            hi: 1.5,
            count: 3,
            symmetric: true,
        };
        assert_eq!(g.points().unwrap(), vec![-1.5, -1.0, -0.5, 0.5, 1.0, 1.5]);
        let empty = GridSection { count: 0, ..g };
        assert!(empty.points().unwrap().is_empty());
    }

    #[test]
    fn exact_input_is_fixed() {
        let report = run_experiment(&reference(false)).unwrap();
        assert!(report.all_checks_passed);
        for r in &report.per_m {
            assert_eq!(r.sup_dev_f, 0.0);
            assert!(r.qm.iterations <= 3);
        }
        assert!(report.uniqueness.is_none());
    }

    #[test]
    fn perturbed_input_recovers_sextic() {
        let report = run_experiment(&reference(true)).unwrap();
        assert_eq!(report.m0.min_member, Some(2));
        assert!(report.all_checks_passed, "{:?}", report.warnings);
        for r in &report.per_m {
            assert!(r.qm.converged && r.qm.iterations <= 60);
            assert!(r.qm.sup_rel_dev_f0 < 1e-6);
            assert!(r.qm.residual.sup_ratio <= 1e-8);
            assert!(r.k_observed <= 1.0 + 1e-6);
            assert!(r.inductive_bound_ratio <= 1.0 + 1e-9);
            // sup of the perturbation, attained at |x| = 0.5
            assert!((r.sup_dev_f - 0.8).abs() < 1e-9);
        }
        assert!(!report.converges_to_f);
        assert!(report.near_diagonal.exceeds_gamma);
        assert!(report.uniqueness.unwrap().agree);
    }

    #[test]
    fn infeasible_model_skips_iteration() {
        let mut cfg = reference(true);
        for c in cfg.error_model.components.iter_mut() {
            c.p = 0.0;
        }
        let report = run_experiment(&cfg).unwrap();
        assert!(!report.feasible && report.per_m.is_empty() && !report.all_checks_passed);
    }

    #[test]
    fn missing_solution_warns() {
        let mut cfg = reference(true);
        cfg.equation = EquationParams::new(1.0, 1.0, 3.0, 2.0).unwrap();
        let prep = cfg.prepare().unwrap();
        assert!(prep.warnings[0].starts_with(NO_EXACT_SOLUTION));
        assert!(prep.f0.terms().is_empty());
    }

    #[test]
    fn config_round_trip() {
        let cfg = reference(true);
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }
}
