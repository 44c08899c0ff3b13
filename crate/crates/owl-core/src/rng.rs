//! Portable seeded randomness.
//!
//! Experiment plans must be reproducible bit-for-bit across runs, platforms,
//! and implementations, so all randomness flows through a fixed, named
//! generator (SplitMix64) rather than whatever the ecosystem default happens
//! to be this year. Per-label streams are derived by hashing the label (FNV-1a)
//! into the seed, which makes per-label work order-independent.

use alloc::vec::Vec;

/// SplitMix64 pseudo-random generator (Steele, Lea & Flood 2014).
///
/// 64 bits of state, full-period, and trivially portable: the same seed
/// yields the same stream on every platform.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Current internal state, for checkpointing.
    pub fn state(&self) -> u64 {
        self.state
    }

    /// Restore a generator from a checkpointed state.
    pub fn from_state(state: u64) -> Self {
        SplitMix64 { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform integer in `[0, bound)` via rejection sampling (unbiased).
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % bound;
            }
        }
    }

    /// Uniform float in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal deviate (Box–Muller, cosine branch).
    pub fn next_standard_normal(&mut self) -> f64 {
        // u1 in (0, 1]: shift the 53-bit integer by one so log never sees 0.
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.next_f64();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
    }

    /// Fisher–Yates shuffle, consuming one draw per position from the end.
    pub fn shuffle<T>(&mut self, slice: &mut [T]) {
        for i in (1..slice.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            slice.swap(i, j);
        }
    }

    /// Draw `k` distinct indices from `[0, n)` (partial Fisher–Yates order).
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        self.shuffle(&mut idx);
        idx.truncate(k.min(n));
        idx
    }
}

/// FNV-1a 64-bit hash. Fixed here so derived seeds never change under us.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash
}

/// Derive an independent stream seed from a base seed and a string tag.
///
/// Used for per-label partition shuffles and per-class sampling so that the
/// result does not depend on the order labels are visited in.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut mix = SplitMix64::new(seed ^ fnv1a64(tag.as_bytes()));
    mix.next_u64()
}

/// Derive an independent stream seed from a base seed and an integer tag.
pub fn derive_seed_u64(seed: u64, tag: u64) -> u64 {
    let mut mix = SplitMix64::new(seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    mix.next_u64()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_reference_vector() {
        // Reference values for seed 1234567 from the public-domain C version.
        let mut rng = SplitMix64::new(1234567);
        let got: Vec<u64> = (0..3).map(|_| rng.next_u64()).collect();
        assert_eq!(
            got,
            vec![
                6457827717110365317,
                3203168211198807973,
                9817491932198370423
            ]
        );
    }

    #[test]
    fn next_below_is_in_range_and_deterministic() {
        let mut a = SplitMix64::new(42);
        let mut b = SplitMix64::new(42);
        for _ in 0..1000 {
            let bound = 1 + (a.next_u64() % 97);
            let x = a.next_below(bound);
            b.next_u64();
            let y = b.next_below(bound);
            assert!(x < bound);
            assert_eq!(x, y);
        }
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut rng = SplitMix64::new(7);
        let mut v: Vec<u32> = (0..100).collect();
        rng.shuffle(&mut v);
        let mut sorted = v.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..100).collect::<Vec<u32>>());
        assert_ne!(v, (0..100).collect::<Vec<u32>>());
    }

    #[test]
    fn derive_seed_label_order_independent() {
        // Streams for "a" and "b" are the same regardless of derivation order.
        let s1 = derive_seed(99, "a");
        let _ = derive_seed(99, "b");
        let s2 = derive_seed(99, "a");
        assert_eq!(s1, s2);
        assert_ne!(derive_seed(99, "a"), derive_seed(99, "b"));
        assert_ne!(derive_seed(99, "a"), derive_seed(100, "a"));
    }

    #[test]
    fn normal_moments_are_sane() {
        let mut rng = SplitMix64::new(2024);
        let n = 20000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let z = rng.next_standard_normal();
            sum += z;
            sumsq += z * z;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.03, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }
}
