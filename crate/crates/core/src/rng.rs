//! Seeded, stream-addressable randomness.
//!
//! Every random draw in the simulator goes through [`SeededRng`]. A generator is
//! identified by a `(seed, stream)` pair; parallel work is split by giving each
//! worker its own stream, never by sharing a generator.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::CVec;

#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// A fresh generator on a stream derived from this one's identity and `tag`.
    pub fn derive(&self, tag: u64) -> SeededRng {
        SeededRng::new(self.seed, mix64(&[self.stream, tag]))
    }

    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    pub fn index(&mut self, upper: usize) -> usize {
        self.inner.random_range(0..upper)
    }

    /// Circularly-symmetric complex Gaussian with unit total variance.
    pub fn complex_normal(&mut self) -> Complex64 {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        Complex64::new(s * self.normal(), s * self.normal())
    }

    pub fn complex_normal_vec(&mut self, n: usize) -> CVec {
        CVec::from_vec((0..n).map(|_| self.complex_normal()).collect())
    }

    /// Uniform point on the unit sphere of `C^n`.
    pub fn unit_sphere(&mut self, n: usize) -> CVec {
        loop {
            let v = self.complex_normal_vec(n);
            let norm = v.norm();
            if norm > 1e-300 {
                return v.scaled(1.0 / norm);
            }
        }
    }

    /// Uniform point in the ball of radius `radius` in `C^n` (a `2n`-dimensional real ball).
    pub fn uniform_in_ball(&mut self, n: usize, radius: f64) -> CVec {
        let dir = self.unit_sphere(n);
        let r = radius * self.uniform().powf(1.0 / (2 * n) as f64);
        dir.scaled(r)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(&mut self.inner);
    }
}

/// SplitMix64-style mixing of a word sequence into one 64-bit value.
///
/// Used to derive stream ids from structured coordinates such as
/// `(master seed, drop, realization, scheme)`. Stable across platforms and
/// compiler versions, unlike `std`'s hasher.
pub fn mix64(words: &[u64]) -> u64 {
    let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
    for &w in words {
        h ^= w.wrapping_add(0x9E37_79B9_7F4A_7C15);
        h = splitmix(h);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
