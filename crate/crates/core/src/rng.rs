//! xoshiro256** seeded through SplitMix64.
//!
//! The stream and every derived draw are fixed here so that generated
//! instances are bit-identical across platforms and implementations:
//!
//! * `next_f64` uses the top 53 bits: `(x >> 11) * 2^-53`, in `[0, 1)`.
//! * `uniform(lo, hi)` is `lo + (hi - lo) * next_f64()`.
//! * `below(n)` rejects draws in the final partial block of size `2^64 mod n`
//!   and returns `x mod n`.

use rand_xoshiro::rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

#[derive(Debug, Clone)]
pub struct Xoshiro256 {
    inner: Xoshiro256StarStar,
}

impl Xoshiro256 {
    /// State words are four SplitMix64 outputs from `seed`.
    pub fn seed_from_u64(seed: u64) -> Self {
        Self { inner: Xoshiro256StarStar::seed_from_u64(seed) }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)`. Panics on `n == 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let reject_from = u64::MAX - (u64::MAX % n + 1) % n;
        loop {
            let x = self.next_u64();
            if x <= reject_from {
                return x % n;
            }
        }
    }

    /// Standard normal draw (Box-Muller, cosine branch only).
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stream_reference_values() {
        // xoshiro256** over SplitMix64(1234567), checked against a from-scratch implementation
        let mut r = Xoshiro256::seed_from_u64(1234567);
        for e in [3504822795582309479u64, 1819558768956484042, 1250851346055027673] {
            assert_eq!(r.next_u64(), e);
        }
    }

    #[test]
    fn deterministic_and_in_range() {
        let mut a = Xoshiro256::seed_from_u64(42);
        let mut b = Xoshiro256::seed_from_u64(42);
        for _ in 0..1000 {
            let x = a.next_f64();
            assert_eq!(x.to_bits(), b.next_f64().to_bits());
            assert!((0.0..1.0).contains(&x));
            let k = a.below(7);
            assert_eq!(k, b.below(7));
            assert!(k < 7);
        }
    }

    #[test]
    fn below_covers_range() {
        let mut r = Xoshiro256::seed_from_u64(3);
        let mut seen = [false; 5];
        for _ in 0..200 {
            seen[r.below(5) as usize] = true;
        }
        assert!(seen.iter().all(|s| *s));
    }
}
