//! Small deterministic PRNG used for seeded fixtures and render jitter.
//!
//! SplitMix64 is used instead of an external RNG crate so that trial replay
//! is bit-identical across platforms and dependency upgrades.

/// SplitMix64 generator (Steele, Lea & Flood 2014). Passes BigCrush for the
/// stream lengths used here and is trivially seedable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Derives an independent stream, e.g. one per trial or per pin.
    pub fn fork(&self, stream: u64) -> Self {
        let mut child = Self::new(self.state ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        child.next_u64();
        Self::new(child.next_u64())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[-1, 1]`.
    pub fn next_signed(&mut self) -> f64 {
        2.0 * self.next_f64() - 1.0
    }

    /// Uniform integer in `[0, n)`.
    pub fn next_below(&mut self, n: u64) -> u64 {
        // Modulo bias is irrelevant at the ranges used here (n << 2^64).
        self.next_u64() % n
    }
}
