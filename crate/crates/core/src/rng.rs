//! Explicitly threaded random state.
//!
//! Every operation that draws randomness takes a `&mut RngState`. States are
//! derived from a run seed plus a path of stream labels, so parallel workers
//! get independent, reproducible streams regardless of scheduling order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Counter-based generator (ChaCha8) with an explicit seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngState {
    inner: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        RngState {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Derive an independent stream from `seed` and a path of labels.
    pub fn derive(seed: u64, path: &[u64]) -> Self {
        Self::new(mix_seed(seed, path))
    }

    /// Split off a child stream; advances `self` by one draw.
    pub fn fork(&mut self) -> Self {
        Self::new(self.inner.next_u64())
    }
}

/// Combine a seed with a label path using splitmix64 finalisation.
pub fn mix_seed(seed: u64, path: &[u64]) -> u64 {
    let mut h = splitmix(seed ^ 0x9E37_79B9_7F4A_7C15);
    for &p in path {
        h = splitmix(h ^ splitmix(p.wrapping_add(0xD1B5_4A32_D192_ED03)));
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngCore for RngState {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derived_streams_are_reproducible_and_distinct() {
        let mut a = RngState::derive(7, &[1, 2]);
        let mut b = RngState::derive(7, &[1, 2]);
        let mut c = RngState::derive(7, &[2, 1]);
        let xa: f64 = a.random();
        let xb: f64 = b.random();
        let xc: f64 = c.random();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }
}
