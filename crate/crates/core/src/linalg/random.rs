//! Seeded Gaussian sampling.
//!
//! Uniforms come from ChaCha8 (`rand_chacha`), whose output stream is fixed
//! by its specification and identical on every platform. Normals use the
//! Box–Muller transform: with `u1 ∈ (0, 1]` and `u2 ∈ [0, 1)` built from the
//! top 53 bits of two consecutive `u64` draws,
//! `z0 = sqrt(-2 ln u1) cos(2π u2)` and `z1 = sqrt(-2 ln u1) sin(2π u2)`.

use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix::DenseMatrix;

const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

/// Deterministic sampler used everywhere randomness is needed.
pub struct Sampler {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * TWO_POW_M53
    }

    /// Uniform integer in `lo..=hi`.
    pub fn uniform_int(&mut self, lo: usize, hi: usize) -> usize {
        debug_assert!(lo <= hi);
        let span = (hi - lo + 1) as u64;
        lo + (self.rng.next_u64() % span) as usize
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 * TWO_POW_M53;
        let u2 = (self.rng.next_u64() >> 11) as f64 * TWO_POW_M53;
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }

    /// `rows × cols` matrix of standard normals, filled row by row.
    pub fn gaussian(&mut self, rows: usize, cols: usize) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |_, _| self.normal())
    }

    pub fn uniform_matrix(&mut self, rows: usize, cols: usize) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |_, _| self.uniform())
    }
}

/// Standard-normal matrix for a seed.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    Sampler::new(seed).gaussian(rows, cols)
}

/// Derives an independent stream seed for item `index` (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let a = gaussian_matrix(4, 3, 42);
        let b = gaussian_matrix(4, 3, 42);
        assert_eq!(a.as_slice(), b.as_slice());
        assert_ne!(a.as_slice(), gaussian_matrix(4, 3, 43).as_slice());
    }

    #[test]
    fn moments_are_plausible() {
        let mut s = Sampler::new(7);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| s.normal()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01);
        assert!((var - 1.0).abs() < 0.01);
        let u: Vec<f64> = (0..n).map(|_| s.uniform()).collect();
        assert!(u.iter().all(|&x| (0.0..1.0).contains(&x)));
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: std::collections::BTreeSet<u64> = (0..1000).map(|k| derive_seed(5, k)).collect();
        assert_eq!(seeds.len(), 1000);
    }
}
