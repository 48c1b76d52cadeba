//! Power-form error models and the contraction constants `A, B, C, P, σ`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{out_of_range, Error, Result};
use crate::fixedpoint::{Branch, ErrorTerm, IterationSpec, ScalarErrorFn};
use crate::radical::EquationParams;
use crate::sampling::uniform_vector;
use crate::scalar::{lit, to_f64, Scalar};
use crate::spaces::{eval_norm, SpaceDescriptor};
use crate::vector::Vector;

use super::sequences::{cube_sequences, sequences_n};

/// The map `g: X → Y` applied to the second argument.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE", bound = "T: Scalar")]
pub enum GMap<T> {
    #[default]
    Identity,
    /// Row-major matrix with one row per coordinate of `Y`.
    FixedLinear(Vec<Vec<T>>),
}

impl<T: Scalar> GMap<T> {
    pub fn apply(&self, z: &Vector<T>) -> Result<Vector<T>> {
        match self {
            GMap::Identity => Ok(z.clone()),
            GMap::FixedLinear(rows) => {
                let out = rows
                    .iter()
                    .map(|r| {
                        if r.len() != z.dim() {
                            return Err(Error::DimensionMismatch {
                                expected: r.len(),
                                got: z.dim(),
                            });
                        }
                        Ok(r.iter().zip(z.coords()).map(|(&a, &b)| a * b).sum())
                    })
                    .collect::<Result<Vec<T>>>()?;
                Vector::new(out)
            }
        }
    }

    fn input_dim(&self, aux_dim: usize) -> usize {
        match self {
            GMap::Identity => aux_dim,
            GMap::FixedLinear(rows) => rows.first().map_or(0, |r| r.len()),
        }
    }
}

/// `h(t, z) = c · ‖t · y, g(z)‖_Y^p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct Component<T> {
    pub c: T,
    pub p: T,
    pub y: Vector<T>,
}

/// The four-factor majorant `γ(x, y, z) = h₁(xⁿ,z) h₂(yⁿ,z) + h₃(xⁿ,z) + h₄(yⁿ,z)`.
///
/// The homogeneity α of the components is the β of `aux_space`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel<T>", into = "RawModel<T>", bound = "T: Scalar")]
pub struct ErrorModel<T> {
    pub components: [Component<T>; 4],
    pub aux_space: SpaceDescriptor<T>,
    pub g_map: GMap<T>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Scalar")]
pub struct RawModel<T> {
    components: Vec<Component<T>>,
    aux_space: SpaceDescriptor<T>,
    #[serde(default)]
    g_map: GMap<T>,
}

impl<T: Scalar> TryFrom<RawModel<T>> for ErrorModel<T> {
    type Error = Error;

    fn try_from(r: RawModel<T>) -> Result<Self> {
        let n = r.components.len();
        let components: [Component<T>; 4] = r
            .components
            .try_into()
            .map_err(|_| Error::InvalidParameter(format!("error model needs exactly 4 components, got {n}")))?;
        Self::new(components, r.aux_space, r.g_map)
    }
}

impl<T: Scalar> From<ErrorModel<T>> for RawModel<T> {
    fn from(m: ErrorModel<T>) -> Self {
        RawModel {
            components: m.components.to_vec(),
            aux_space: m.aux_space,
            g_map: m.g_map,
        }
    }
}

/// Sign conditions under which each constant can shrink with `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feasibility {
    pub p12_negative: bool,
    pub p3_negative: bool,
    pub p4_negative: bool,
}

impl<T: Scalar> ErrorModel<T> {
    pub fn new(components: [Component<T>; 4], aux_space: SpaceDescriptor<T>, g_map: GMap<T>) -> Result<Self> {
        aux_space.validate()?;
        for (i, c) in components.iter().enumerate() {
            if !(c.c.is_finite() && c.c >= T::zero()) {
                return Err(out_of_range(&format!("c_{}", i + 1), "[0,inf)", to_f64(c.c)));
            }
            if !c.p.is_finite() {
                return Err(Error::NonFinite(format!("p_{}", i + 1)));
            }
            c.y.check_dim(aux_space.dim)?;
        }
        if let GMap::FixedLinear(rows) = &g_map {
            if rows.len() != aux_space.dim {
                return Err(Error::DimensionMismatch {
                    expected: aux_space.dim,
                    got: rows.len(),
                });
            }
            let w = rows.first().map_or(0, |r| r.len());
            if w == 0 || rows.iter().any(|r| r.len() != w || r.iter().any(|v| !v.is_finite())) {
                return Err(Error::InvalidParameter("g_map matrix must be rectangular, nonempty and finite".into()));
            }
        }
        Ok(Self {
            components,
            aux_space,
            g_map,
        })
    }

    /// Same shape for all four components: `c_i`, `p_i`, common `y`.
    pub fn uniform(cs: [T; 4], ps: [T; 4], y: Vector<T>, aux_space: SpaceDescriptor<T>) -> Result<Self> {
        let comp = |i: usize| Component {
            c: cs[i],
            p: ps[i],
            y: y.clone(),
        };
        Self::new([comp(0), comp(1), comp(2), comp(3)], aux_space, GMap::Identity)
    }

    pub fn alpha(&self) -> T {
        self.aux_space.beta
    }

    pub fn feasibility(&self) -> Feasibility {
        let p = |i: usize| self.components[i].p;
        Feasibility {
            p12_negative: p(0) + p(1) < T::zero(),
            p3_negative: p(2) < T::zero(),
            p4_negative: p(3) < T::zero(),
        }
    }

    /// `‖y_i, g(z)‖^{p_i}`.
    pub fn weight(&self, i: usize, z: &Vector<T>) -> Result<T> {
        let comp = &self.components[i];
        let n = eval_norm(&self.aux_space, &comp.y, &self.g_map.apply(z)?)?;
        if n.is_zero() && comp.p < T::zero() {
            return Err(Error::NonFinite(format!(
                "h_{} weight: witness is dependent on y_{}",
                i + 1,
                i + 1
            )));
        }
        Ok(n.powf(comp.p))
    }

    /// `h_i(t, z) = c_i ‖t y_i, g(z)‖^{p_i}`, evaluated through the norm.
    /// A zero `c_i` gives zero even where the norm factor is infinite.
    pub fn h(&self, i: usize, t: T, z: &Vector<T>) -> Result<T> {
        let comp = &self.components[i];
        if comp.c.is_zero() {
            return Ok(T::zero());
        }
        let n = eval_norm(&self.aux_space, &comp.y.scale(t), &self.g_map.apply(z)?)?;
        Ok(comp.c * n.powf(comp.p))
    }

    /// `γ(x, y, z)` for root degree `root_n`.
    pub fn gamma(&self, x: T, y: T, z: &Vector<T>, root_n: u32) -> Result<T> {
        let (xn, yn) = (x.powi(root_n as i32), y.powi(root_n as i32));
        Ok(self.h(0, xn, z)? * self.h(1, yn, z)? + self.h(2, xn, z)? + self.h(3, yn, z)?)
    }

    /// `h₁(xⁿ,z) h₂(xⁿ,z) + h₃(xⁿ,z) + h₄(xⁿ,z)`.
    pub fn bracket(&self, x: T, z: &Vector<T>, root_n: u32) -> Result<T> {
        self.gamma(x, x, z, root_n)
    }

    /// The bracket as power terms in `|x|`, for the fixed witness `z`.
    pub fn bracket_fn(&self, z: &Vector<T>, root_n: u32) -> Result<ScalarErrorFn<T>> {
        self.power_terms(z, root_n, [T::one(); 3])
    }

    fn power_terms(&self, z: &Vector<T>, root_n: u32, mult: [T; 3]) -> Result<ScalarErrorFn<T>> {
        let k = lit::<T>(root_n as f64) * self.alpha();
        let c = |i: usize| self.components[i].c;
        let p = |i: usize| self.components[i].p;
        let weighted = |i: usize| -> Result<T> {
            if c(i).is_zero() {
                Ok(T::zero())
            } else {
                Ok(c(i) * self.weight(i, z)?)
            }
        };
        let c12 = if c(0).is_zero() || c(1).is_zero() {
            T::zero()
        } else {
            weighted(0)? * weighted(1)?
        };
        ScalarErrorFn::new(
            vec![
                ErrorTerm {
                    c: c12 * mult[0],
                    s: k * (p(0) + p(1)),
                },
                ErrorTerm {
                    c: weighted(2)? * mult[1],
                    s: k * p(2),
                },
                ErrorTerm {
                    c: weighted(3)? * mult[2],
                    s: k * p(3),
                },
            ],
            T::one(),
        )
    }
}

/// `s_i(ρ) = |ρ|^{α p_i}`.
pub fn s_multiplier<T: Scalar>(model: &ErrorModel<T>, i: usize, rho: T) -> Result<T> {
    if rho.is_zero() {
        return Err(Error::ZeroArgument);
    }
    Ok(rho.abs().powf(model.alpha() * model.components[i].p))
}

/// Sampled `sup h_i(ρt, z) / h_i(t, z)` over `samples` draws of `t` and `z`,
/// evaluated through the auxiliary norm. Ignores `c_i`, which cancels.
pub fn s_multiplier_sampled<T: Scalar>(
    model: &ErrorModel<T>,
    i: usize,
    rho: T,
    samples: usize,
    seed: u64,
) -> Result<T> {
    if rho.is_zero() {
        return Err(Error::ZeroArgument);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comp = &model.components[i];
    let zdim = model.g_map.input_dim(model.aux_space.dim);
    let mut best = T::neg_infinity();
    for _ in 0..samples {
        let t: T = lit(rng.gen_range(0.1..10.0) * if rng.gen::<bool>() { 1.0 } else { -1.0 });
        let z = uniform_vector::<T, _>(&mut rng, zdim, 10.0);
        let gz = model.g_map.apply(&z)?;
        let den = eval_norm(&model.aux_space, &comp.y.scale(t), &gz)?;
        let num = eval_norm(&model.aux_space, &comp.y.scale(rho * t), &gz)?;
        if den.is_zero() || num.is_zero() {
            continue;
        }
        best = best.max((num / den).powf(comp.p));
    }
    if best == T::neg_infinity() {
        return Err(Error::InvalidParameter("no sample with a nonzero norm factor".into()));
    }
    Ok(best)
}

/// Which of the three limit conditions on `s_i` hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitConditions {
    /// `s₁(ρ)s₂(ρ) → 0` as `|ρ| → ∞`.
    pub i: bool,
    /// `s₃(ρ) → 0`.
    pub ii: bool,
    /// `s₄(ρ) → 0`.
    pub iii: bool,
    /// Constants attaining `P` (several on ties).
    pub attained_by: Vec<String>,
    /// Every attaining constant has its condition satisfied.
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct HyperstabConstants<T> {
    pub m: u32,
    pub root_n: u32,
    pub u: T,
    pub v: T,
    pub w: T,
    /// `uⁿ, vⁿ, wⁿ` computed without roots.
    pub u_pow: T,
    pub v_pow: T,
    pub w_pow: T,
    #[serde(rename = "A")]
    pub a: T,
    #[serde(rename = "B")]
    pub b: T,
    #[serde(rename = "C")]
    pub c: T,
    #[serde(rename = "P")]
    pub p: T,
    pub sigma: T,
    pub in_m0: bool,
    pub conditions: LimitConditions,
}

/// `A_m, B_m, C_m, P_m, σ_m` for the equation and model in a space with
/// modulus `kappa` and homogeneity `beta`.
pub fn constants<T: Scalar>(
    eq: &EquationParams<T>,
    model: &ErrorModel<T>,
    kappa: T,
    beta: T,
    m: u32,
) -> Result<HyperstabConstants<T>> {
    let n = eq.root_n;
    let seq = sequences_n(eq.a, eq.b, m, n)?;
    let (up, vp, wp) = cube_sequences(&eq.a, &eq.b, m, n);
    let s = |i: usize, rho: T| s_multiplier(model, i, rho);
    let lc = kappa * eq.c.abs().powf(beta);
    let ld = kappa * kappa * eq.d.abs().powf(beta);
    let lw = kappa * kappa;
    let combo = |f: &dyn Fn(T) -> Result<T>| -> Result<T> { Ok(lc * f(up)? + ld * f(vp)? + lw * f(wp)?) };
    let a = combo(&|r| Ok(s(0, r)? * s(1, r)?))?;
    let b = combo(&|r| s(2, r))?;
    let c = combo(&|r| s(3, r))?;
    let p = a.max(b).max(c);
    let sigma = (s(0, up)? * s(1, vp)?).max(s(2, up)?).max(s(3, vp)?);

    let alpha = model.alpha();
    let pc = |i: usize| model.components[i].p;
    let cond_i = alpha * (pc(0) + pc(1)) < T::zero();
    let cond_ii = alpha * pc(2) < T::zero();
    let cond_iii = alpha * pc(3) < T::zero();
    let mut attained_by = Vec::new();
    let mut satisfied = true;
    for (name, val, ok) in [("A", a, cond_i), ("B", b, cond_ii), ("C", c, cond_iii)] {
        if val == p {
            attained_by.push(name.to_string());
            satisfied &= ok;
        }
    }
    Ok(HyperstabConstants {
        m,
        root_n: n,
        u: seq.u,
        v: seq.v,
        w: seq.w,
        u_pow: up,
        v_pow: vp,
        w_pow: wp,
        a,
        b,
        c,
        p,
        sigma,
        in_m0: p < T::one(),
        conditions: LimitConditions {
            i: cond_i,
            ii: cond_ii,
            iii: cond_iii,
            attained_by,
            satisfied,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct M0Scan<T> {
    pub members: Vec<u32>,
    pub min_member: Option<u32>,
    /// `σ_{m_max} < σ_{min member}`; `None` when there are no members.
    pub sigma_decreasing: Option<bool>,
    pub sweep: Vec<HyperstabConstants<T>>,
}

/// Scans `m = 2..=m_max` for members of `M₀ = {m : P_m < 1}`.
pub fn find_m0<T: Scalar>(
    eq: &EquationParams<T>,
    model: &ErrorModel<T>,
    kappa: T,
    beta: T,
    m_max: u32,
) -> Result<M0Scan<T>> {
    if m_max < 2 {
        return Err(Error::InvalidParameter(format!("m_max must be at least 2, got {m_max}")));
    }
    let sweep = (2..=m_max)
        .map(|m| constants(eq, model, kappa, beta, m))
        .collect::<Result<Vec<_>>>()?;
    let members: Vec<u32> = sweep.iter().filter(|c| c.in_m0).map(|c| c.m).collect();
    let min_member = members.first().copied();
    let sigma_decreasing = min_member.map(|m| sweep.last().expect("nonempty").sigma < sweep[(m - 2) as usize].sigma);
    Ok(M0Scan {
        members,
        min_member,
        sigma_decreasing,
        sweep,
    })
}

/// `K σ^θ [h₁h₂ + h₃ + h₄](xⁿ, z)^θ / (1 − P^θ)`.
pub fn theorem_bound<T: Scalar>(
    model: &ErrorModel<T>,
    k: &HyperstabConstants<T>,
    theta: T,
    big_k: T,
    x: T,
    z: &Vector<T>,
) -> Result<T> {
    if !(theta > T::zero() && theta <= T::one()) {
        return Err(out_of_range("theta", "(0,1]", to_f64(theta)));
    }
    if !(k.p < T::one()) {
        return Err(Error::NotContractive(to_f64(k.p)));
    }
    if k.sigma.is_zero() || big_k.is_zero() {
        return Ok(T::zero());
    }
    let bracket = model.bracket(x, z, k.root_n)?;
    Ok(big_k * k.sigma.powf(theta) * bracket.powf(theta) / (T::one() - k.p.powf(theta)))
}

/// `T_m` as an iteration spec: branches `(u, c)`, `(v, d)`, `(w, −1)` with
/// weights `κ|c|^β`, `κ²|d|^β`, `κ²`.
pub fn radical_spec<T: Scalar>(eq: &EquationParams<T>, space: &SpaceDescriptor<T>, m: u32) -> Result<IterationSpec<T>> {
    sequences_n(eq.a, eq.b, m, eq.root_n)?;
    let n = eq.root_n;
    let (up, vp, wp) = cube_sequences(&eq.a, &eq.b, m, n);
    IterationSpec::new(
        space.clone(),
        vec![
            Branch::radical(space, up, n, eq.c, 1),
            Branch::radical(space, vp, n, eq.d, 2),
            Branch::radical(space, wp, n, -T::one(), 2),
        ],
    )
}

/// `ε_m(·, z) = h₁(uⁿxⁿ,z) h₂(vⁿxⁿ,z) + h₃(uⁿxⁿ,z) + h₄(vⁿxⁿ,z)` as power
/// terms in `|x|`.
pub fn epsilon_m<T: Scalar>(model: &ErrorModel<T>, k: &HyperstabConstants<T>, z: &Vector<T>) -> Result<ScalarErrorFn<T>> {
    let s = |i: usize, rho: T| s_multiplier(model, i, rho);
    model.power_terms(
        z,
        k.root_n,
        [s(0, k.u_pow)? * s(1, k.v_pow)?, s(2, k.u_pow)?, s(3, k.v_pow)?],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Exact;
    use num_rational::BigRational;
    use num_traits::ToPrimitive;

    pub(crate) fn reference_model(ps: [f64; 4]) -> ErrorModel<f64> {
        ErrorModel::uniform(
            [10.0; 4],
            ps,
            Vector::basis(3, 2),
            SpaceDescriptor::cross_2norm(3).unwrap(),
        )
        .unwrap()
    }

    fn std_eq() -> EquationParams<f64> {
        EquationParams::new(1.0, 1.0, 2.0, 2.0).unwrap()
    }

    #[test]
    fn s_multiplier_examples() {
        let m = reference_model([-1.0, -1.0, -2.0, -2.0]);
        assert_eq!(s_multiplier(&m, 0, 8.0).unwrap(), 0.125);
        assert_eq!(s_multiplier(&m, 2, 1.0).unwrap(), 1.0);
        assert!(s_multiplier(&m, 0, 0.0).is_err());
        let est = s_multiplier_sampled(&m, 0, 8.0, 100, 1).unwrap();
        assert!((est - 0.125).abs() <= 1e-9 * 0.125);
    }

    #[test]
    fn a2_matches_exact_rational() {
        let m = reference_model([-1.0, -1.0, -2.0, -2.0]);
        let k = constants(&std_eq(), &m, 1.0, 1.0, 2).unwrap();
        // 2/64 + 2/49 + 1/225 = 26993/352800
        let exact = BigRational::new(26993.into(), 352800.into()).to_f64().unwrap();
        assert!((k.a - exact).abs() < 1e-15);
        assert!((k.b - k.a).abs() < 1e-15 && (k.c - k.a).abs() < 1e-15);
        assert!(k.in_m0);
        let sum: Exact = [(2, 64), (2, 49), (1, 225)]
            .iter()
            .map(|&(n, d)| Exact::new(n.into(), d.into()))
            .sum();
        assert_eq!(sum, BigRational::new(26993.into(), 352800.into()));
        assert!(k.conditions.satisfied);
    }

    #[test]
    fn p_decays_and_m0() {
        let m = reference_model([-1.0, -1.0, -2.0, -2.0]);
        let scan = find_m0(&std_eq(), &m, 1.0, 1.0, 50).unwrap();
        assert_eq!(scan.min_member, Some(2));
        assert!(scan.sweep.last().unwrap().p < 1e-3);
        assert_eq!(scan.sigma_decreasing, Some(true));
        let brute: Vec<u32> = (2..=50)
            .filter(|&mm| constants(&std_eq(), &m, 1.0, 1.0, mm).unwrap().p < 1.0)
            .collect();
        assert_eq!(scan.members, brute);

        let flat = reference_model([0.0; 4]);
        let scan = find_m0(&std_eq(), &flat, 1.0, 1.0, 20).unwrap();
        assert!(scan.members.is_empty());
        assert_eq!(scan.sweep[0].p, 5.0);
    }

    #[test]
    fn bound_arithmetic() {
        let m = reference_model([-1.0, -1.0, -2.0, -2.0]);
        let mut k = constants(&std_eq(), &m, 1.0, 1.0, 2).unwrap();
        let z = Vector::basis(3, 0);
        k.sigma = 0.0;
        assert_eq!(theorem_bound(&m, &k, 1.0, 1.0, 1.0, &z).unwrap(), 0.0);
        k.sigma = 0.5;
        k.p = 0.5;
        let bracket = m.bracket(1.0, &z, 3).unwrap();
        let b = theorem_bound(&m, &k, 1.0, 1.0, 1.0, &z).unwrap();
        assert!((b - bracket).abs() < 1e-12 * bracket);
        let mut prev = 0.0;
        for p in [0.1, 0.5, 0.9] {
            k.p = p;
            let b = theorem_bound(&m, &k, 0.5, 1.0, 1.0, &z).unwrap();
            assert!(b > prev);
            prev = b;
        }
        k.p = 1.0;
        assert!(matches!(theorem_bound(&m, &k, 1.0, 1.0, 1.0, &z), Err(Error::NotContractive(_))));
    }

    #[test]
    fn epsilon_matches_definition() {
        let m = reference_model([-1.0, -0.5, -2.0, -1.5]);
        let k = constants(&std_eq(), &m, 1.0, 1.0, 3).unwrap();
        let z = Vector::from_f64(&[1.0, 1.0, 1.0]).unwrap();
        let e = epsilon_m(&m, &k, &z).unwrap();
        for x in [0.3, -1.2, 2.5] {
            let x3 = x * x * x;
            let direct = m.h(0, k.u_pow * x3, &z).unwrap() * m.h(1, k.v_pow * x3, &z).unwrap()
                + m.h(2, k.u_pow * x3, &z).unwrap()
                + m.h(3, k.v_pow * x3, &z).unwrap();
            let v = e.eval(x).unwrap();
            assert!((v - direct).abs() <= 1e-12 * direct);
        }
    }

    #[test]
    fn dependent_witness_is_rejected() {
        let m = reference_model([-1.0, -1.0, -2.0, -2.0]);
        assert!(m.weight(0, &Vector::basis(3, 2)).is_err());
    }

    #[test]
    fn model_json() {
        let text = r#"{"components":[{"c":1,"p":-1,"y":[0,0,1]},{"c":1,"p":-1,"y":[0,0,1]},{"c":1,"p":-2,"y":[0,0,1]},{"c":1,"p":-2,"y":[0,0,1]}],"aux_space":{"family":"CROSS_2NORM"}}"#;
        let m: ErrorModel<f64> = serde_json::from_str(text).unwrap();
        assert_eq!(m.g_map, GMap::Identity);
        let three = r#"{"components":[{"c":1,"p":-1,"y":[0,0,1]}],"aux_space":{"family":"CROSS_2NORM"}}"#;
        assert!(serde_json::from_str::<ErrorModel<f64>>(three).is_err());
        let lin = r#"{"components":[{"c":1,"p":-1,"y":[0,0,1]},{"c":1,"p":-1,"y":[0,0,1]},{"c":1,"p":-2,"y":[0,0,1]},{"c":1,"p":-2,"y":[0,0,1]}],"aux_space":{"family":"CROSS_2NORM"},"g_map":{"FIXED_LINEAR":[[1,0],[0,1],[1,1]]}}"#;
        let m: ErrorModel<f64> = serde_json::from_str(lin).unwrap();
        let gz = m.g_map.apply(&Vector::from_f64(&[2.0, 3.0]).unwrap()).unwrap();
        assert_eq!(gz.coords(), &[2.0, 3.0, 5.0]);
    }
}
