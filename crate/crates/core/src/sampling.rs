//! Seeded sampling of chart points and rational coefficients.

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::scalarfield::poly::rational_to_f64;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Axis-aligned box `[lo, hi]^n` that sample points are drawn from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleBox {
    pub lo: f64,
    pub hi: f64,
}

impl Default for SampleBox {
    fn default() -> Self {
        SampleBox { lo: 0.25, hi: 3.0 }
    }
}

impl SampleBox {
    pub fn new(lo: f64, hi: f64) -> Self {
        assert!(lo < hi, "empty sample box");
        SampleBox { lo, hi }
    }

    pub fn sample_f64<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(self.lo..=self.hi)).collect()
    }

    /// Rational point with denominators in `1..=12`.
    pub fn sample_rational<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<BigRational> {
        (0..n)
            .map(|_| loop {
                let d: i64 = rng.gen_range(1..=12);
                let lo = (self.lo * d as f64).ceil() as i64;
                let hi = (self.hi * d as f64).floor() as i64;
                if lo <= hi {
                    let k = rng.gen_range(lo..=hi);
                    break BigRational::new(BigInt::from(k), BigInt::from(d));
                }
            })
            .collect()
    }
}

/// A random nonzero rational `k/d` with `|k| <= 20`, `1 <= d <= 7`.
pub fn random_coefficient<R: Rng>(rng: &mut R) -> BigRational {
    loop {
        let k: i64 = rng.gen_range(-20..=20);
        if k != 0 {
            let d: i64 = rng.gen_range(1..=7);
            return BigRational::new(BigInt::from(k), BigInt::from(d));
        }
    }
}

pub fn to_f64_point(p: &[BigRational]) -> Vec<f64> {
    p.iter().map(rational_to_f64).collect()
}
