use rand::{Rng, RngCore, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;

/// Portable seeded generator: xoshiro256++ whose 256-bit state is expanded
/// from the 64-bit seed with SplitMix64. The stream for a given seed is the
/// same on every platform.
#[derive(Debug, Clone)]
pub struct SeededRng {
    inner: Xoshiro256PlusPlus,
}

/// SplitMix64 finaliser applied to `seed ⊕ (stream · φ)`; used to give each
/// client, round or sweep cell its own independent seed.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
        }
    }

    /// Generator for sub-stream `stream` of `seed`.
    pub fn derive(seed: u64, stream: u64) -> Self {
        Self::new(mix_seed(seed, stream))
    }

    /// Uniform on `[0, 1)` with 53 random mantissa bits.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = SeededRng::new(42);
        let mut b = SeededRng::new(42);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let xs: Vec<u64> = (0..8).map(|_| a.standard_normal().to_bits()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.standard_normal().to_bits()).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn known_first_output() {
        // xoshiro256++ seeded through SplitMix64(0); frozen so any change to
        // the generator is caught.
        let mut r = SeededRng::new(0);
        let first = r.next_u64();
        let mut again = SeededRng::new(0);
        assert_eq!(first, again.next_u64());
        assert_eq!(first, FIRST_OUTPUT_SEED0);
    }

    const FIRST_OUTPUT_SEED0: u64 = 0x53175d61490b23df;

    #[test]
    fn derived_streams_differ() {
        let mut a = SeededRng::derive(7, 0);
        let mut b = SeededRng::derive(7, 1);
        assert_ne!(a.next_u64(), b.next_u64());
        assert_ne!(mix_seed(7, 0), mix_seed(7, 1));
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut r = SeededRng::new(3);
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }
}
