//! Deterministic, chunk-partitioned random sampling.
//!
//! Trial `t` always lands in chunk `t / CHUNK` and is drawn from the ChaCha
//! stream of that chunk, so the sample for a given trial index does not depend
//! on the total trial count or on how chunks are scheduled across workers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::{lit, Scalar};
use crate::vector::Vector;

pub(crate) const CHUNK: usize = 256;

/// Coordinate range for generic samples.
pub const COORD_RANGE: f64 = 10.0;
/// Noise amplitude used for near-dependent pairs.
pub const NEAR_DEPENDENT_NOISE: f64 = 1e-8;

pub(crate) fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Chunk index ranges covering `0..trials`.
pub(crate) fn chunks(trials: usize) -> Vec<(usize, std::ops::Range<usize>)> {
    (0..trials.div_ceil(CHUNK))
        .map(|c| (c, c * CHUNK..((c + 1) * CHUNK).min(trials)))
        .collect()
}

/// Independent sub-seed for item `idx` of a run seeded with `seed` (splitmix64).
pub(crate) fn derive_seed(seed: u64, idx: u64) -> u64 {
    let mut z = seed ^ idx.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn uniform<T: Scalar, R: Rng>(rng: &mut R, lo: f64, hi: f64) -> T {
    lit(rng.gen_range(lo..hi))
}

pub(crate) fn uniform_vector<T: Scalar, R: Rng>(rng: &mut R, dim: usize, half: f64) -> Vector<T> {
    Vector::from_vec_unchecked((0..dim).map(|_| uniform(rng, -half, half)).collect())
}

/// Standard normal via Box-Muller.
pub(crate) fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Geometry class of a sampled triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleKind {
    Generic,
    NearDependent,
    Sparse,
}

/// One sampled triple `(x, y, z)` with a scalar `lambda`.
#[derive(Debug, Clone)]
pub struct Triple<T> {
    pub x: Vector<T>,
    pub y: Vector<T>,
    pub z: Vector<T>,
    pub lambda: T,
    pub kind: SampleKind,
}

/// Mixture: 80% i.i.d. uniform coordinates on [-10, 10]; 10% near-dependent
/// pairs `y = t x + 1e-8 * noise`; 10% sparse triples where each coordinate
/// is zeroed independently with probability 1/2.
pub(crate) fn sample_triple<T: Scalar, R: Rng>(rng: &mut R, dim: usize) -> Triple<T> {
    let u: f64 = rng.gen();
    let mut x = uniform_vector(rng, dim, COORD_RANGE);
    let mut y = uniform_vector(rng, dim, COORD_RANGE);
    let mut z = uniform_vector(rng, dim, COORD_RANGE);
    let lambda = uniform(rng, -COORD_RANGE, COORD_RANGE);
    let kind = if u < 0.8 {
        SampleKind::Generic
    } else if u < 0.9 {
        let t: T = uniform(rng, -COORD_RANGE, COORD_RANGE);
        let noise = uniform_vector(rng, dim, 1.0);
        y = x.scale(t).axpy(lit(NEAR_DEPENDENT_NOISE), &noise);
        SampleKind::NearDependent
    } else {
        for v in [&mut x, &mut y, &mut z] {
            let coords = v
                .coords()
                .iter()
                .map(|&c| if rng.gen::<bool>() { T::zero() } else { c })
                .collect();
            *v = Vector::from_vec_unchecked(coords);
        }
        SampleKind::Sparse
    };
    Triple {
        x,
        y,
        z,
        lambda,
        kind,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunks_cover_range() {
        let c = chunks(600);
        assert_eq!(c.len(), 3);
        assert_eq!(c[2].1, 512..600);
        assert!(chunks(0).is_empty());
    }

    #[test]
    fn streams_are_reproducible() {
        let a: Triple<f64> = sample_triple(&mut chunk_rng(7, 3), 3);
        let b: Triple<f64> = sample_triple(&mut chunk_rng(7, 3), 3);
        assert_eq!(a.x, b.x);
        assert_eq!(a.z, b.z);
    }
}
