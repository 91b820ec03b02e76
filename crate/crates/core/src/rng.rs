//! Seedable randomness for instance generation.
//!
//! Everything here is pinned to a named algorithm so instances regenerate
//! bit-exactly from (seed, stream) on a given build: ChaCha8 supplies 64-bit
//! words, uniforms are `((word >> 11) + 1)·2⁻⁵³` ∈ (0, 1], normal deviates
//! come from the trigonometric Box-Muller transform (pairs cached), bounded
//! integers use modulo rejection, and subsets use a partial Fisher-Yates
//! shuffle. Cross-platform the only wiggle room is libm's sin/cos/ln, which
//! agree to well below 1e-12.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Deterministic source of uniforms, standard normals, and index draws.
#[derive(Clone, Debug)]
pub struct GaussianSampler {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianSampler {
    /// Independent streams from one seed: the generator is seeded with
    /// `seed` and positioned on ChaCha stream `stream` (instance data and
    /// iterate initialization draw from different streams of the same seed).
    pub fn from_seed_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        GaussianSampler { rng, spare: None }
    }

    /// Uniform on (0, 1] with 53-bit resolution.
    pub fn uniform_01(&mut self) -> f64 {
        (((self.rng.next_u64() >> 11) + 1) as f64) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal deviate (Box-Muller; the paired value is cached).
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform_01();
        let u2 = self.uniform_01();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }

    /// Uniform integer in [0, n). Rejects the low `2⁶⁴ mod n` words so every
    /// residue is exactly equally likely.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0) is empty");
        let n64 = n as u64;
        let threshold = n64.wrapping_neg() % n64; // = 2⁶⁴ mod n
        loop {
            let word = self.rng.next_u64();
            if word >= threshold {
                return (word % n64) as usize;
            }
        }
    }

    /// `k` distinct indices drawn uniformly from [0, n) via a partial
    /// Fisher-Yates shuffle; returned in draw order.
    pub fn choose_without_replacement(&mut self, n: usize, k: usize) -> Vec<usize> {
        assert!(k <= n, "cannot choose {k} of {n} without replacement");
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}
