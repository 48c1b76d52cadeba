//! Closed form of `T_mⁿ` for `(T_m ξ)(x) = c ξ(u x) + d ξ(v x) − ξ(w x)`.
//!
//! The three scalings commute, so
//! `T_mⁿ ξ(x) = Σ_{i+j+k=n} n!/(i! j! k!) c^i d^j (−1)^k ξ(u^i v^j w^k x)`,
//! a table of `(n+1)(n+2)/2` entries instead of `3ⁿ` leaves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::Evaluate;
use crate::radical::EquationParams;
use crate::scalar::{lit, Ring, Scalar};
use crate::vector::Vector;

use super::sequences::{cube_sequences, sequences_n};

/// Largest supported order.
pub const MAX_ORDER: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ExpansionEntry<T> {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub coeff: T,
    pub scale: T,
    /// `scaleⁿ = U^i V^j W^k`, formed from the root-free cubes.
    pub scale_pow: T,
    /// `ln |coeff|`
    pub log_magnitude: T,
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ExpansionTable<T> {
    pub m: u32,
    pub n: usize,
    pub entries: Vec<ExpansionEntry<T>>,
}

fn log_add_exp<T: Scalar>(a: T, b: T) -> T {
    if a == T::neg_infinity() {
        return b;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Pascal's triangle up to row `n` under the given addition.
fn pascal<V: Copy>(n: usize, one: V, zero: V, add: impl Fn(V, V) -> V) -> Vec<Vec<V>> {
    let mut rows: Vec<Vec<V>> = vec![vec![one]];
    for r in 1..=n {
        let prev = &rows[r - 1];
        let row = (0..=r)
            .map(|s| {
                let left = if s > 0 { prev[s - 1] } else { zero };
                let right = if s < r { prev[s] } else { zero };
                add(left, right)
            })
            .collect();
        rows.push(row);
    }
    rows
}

/// `ln C(r, s)` in the log domain.
fn log_binomials<T: Scalar>(n: usize) -> Vec<Vec<T>> {
    pascal(n, T::zero(), T::neg_infinity(), log_add_exp)
}

/// Table for `T_mⁿ` of the given equation.
pub fn expand_t_power<T: Scalar>(eq: &EquationParams<T>, m: u32, n: usize) -> Result<ExpansionTable<T>> {
    if n > MAX_ORDER {
        return Err(Error::OrderTooLarge(n));
    }
    let s = sequences_n(eq.a, eq.b, m, eq.root_n)?;
    let (up, vp, wp) = cube_sequences(&eq.a, &eq.b, m, eq.root_n);
    let lb = log_binomials::<T>(n);
    let bin = pascal(n, T::one(), T::zero(), |p, q| p + q);
    let (lc, ld) = (eq.c.abs().ln(), eq.d.abs().ln());
    let mut entries = Vec::with_capacity((n + 1) * (n + 2) / 2);
    for i in 0..=n {
        for j in 0..=(n - i) {
            let k = n - i - j;
            let log_magnitude = lb[n][i] + lb[n - i][j] + lit::<T>(i as f64) * lc + lit::<T>(j as f64) * ld;
            let mut sign: i8 = if k.is_multiple_of(2) { 1 } else { -1 };
            if eq.c < T::zero() && i % 2 == 1 {
                sign = -sign;
            }
            if eq.d < T::zero() && j % 2 == 1 {
                sign = -sign;
            }
            // Binomials up to row 40 are exact integers in f64, so the direct
            // product is exact whenever c and d are small integers.
            let direct = bin[n][i] * bin[n - i][j] * eq.c.abs().powi(i as i32) * eq.d.abs().powi(j as i32);
            let magnitude = if direct.is_finite() { direct } else { log_magnitude.exp() };
            let coeff = lit::<T>(sign as f64) * magnitude;
            let scale = s.u.powi(i as i32) * s.v.powi(j as i32) * s.w.powi(k as i32);
            let scale_pow = up.powi(i as i32) * vp.powi(j as i32) * wp.powi(k as i32);
            entries.push(ExpansionEntry {
                i,
                j,
                k,
                coeff,
                scale,
                scale_pow,
                log_magnitude,
                sign,
            });
        }
    }
    Ok(ExpansionTable { m, n, entries })
}

impl<T: Scalar> ExpansionTable<T> {
    /// `(T_mⁿ f)(x)` and the term mass `Σ |coeff| ‖f(scale x)‖∞`.
    pub fn apply(&self, f: &impl Evaluate<T>, x: T) -> Result<(Vector<T>, T)> {
        let mut acc: Option<Vector<T>> = None;
        let mut mass = T::zero();
        for e in &self.entries {
            let v = f.value(e.scale * x)?;
            mass += e.coeff.abs() * v.norm_inf();
            acc = Some(match acc {
                None => v.scale(e.coeff),
                Some(a) => a.axpy(e.coeff, &v),
            });
        }
        Ok((acc.expect("table is never empty"), mass))
    }

    /// `Σ coeff · |scale|^deg` and `Σ |coeff · |scale|^deg|`, with the
    /// powers taken of `scaleⁿ`.
    pub fn power_sum(&self, deg: T, root_n: u32) -> (T, T) {
        let e_n = deg / lit::<T>(root_n as f64);
        self.entries.iter().fold((T::zero(), T::zero()), |(s, m), e| {
            let t = e.coeff * e.scale_pow.abs().powf(e_n);
            (s + t, m + t.abs())
        })
    }
}

/// `Σ_{i+j+k=n} n!/(i!j!k!) c^i d^j (−1)^k U^{2i} V^{2j} W^{2k}` with
/// `c = 2a²`, `d = 2b²` and the cube sequences, in the ring `F`.
/// Equals one for every `m` and `n`.
pub fn exact_sextic_table_sum<F: Ring>(a: &F, b: &F, m: u32, n: usize, root_n: u32) -> Result<F> {
    if n > MAX_ORDER {
        return Err(Error::OrderTooLarge(n));
    }
    let (u, v, w) = cube_sequences(a, b, m, root_n);
    let two = F::one() + F::one();
    let c = two.clone() * a.clone() * a.clone();
    let d = two * b.clone() * b.clone();
    let pow = |x: &F, e: usize| (0..e).fold(F::one(), |p, _| p * x.clone());
    let (cu, dv, w2) = (c * u.clone() * u, d * v.clone() * v, w.clone() * w);
    let binom = pascal(n, 1u64, 0, |p, q| p + q);
    let mut total = F::zero();
    for i in 0..=n {
        for j in 0..=(n - i) {
            let k = n - i - j;
            let coeff = F::from_u64(binom[n][i]).expect("embeds") * F::from_u64(binom[n - i][j]).expect("embeds");
            let term = coeff * pow(&cu, i) * pow(&dv, j) * pow(&w2, k);
            total = if k.is_multiple_of(2) { total + term } else { total - term };
        }
    }
    Ok(total)
}
