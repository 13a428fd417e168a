//! Seeded deterministic random streams used across the workspace.
//!
//! Everything that draws randomness goes through [`SplitMix64`] so that a
//! single 64-bit seed reproduces a run bit for bit.

/// SplitMix64 stream: fast, trivially forkable, and fixed per repo so golden
/// files stay stable.
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Derive an independent stream for a labeled subtask (per-frame masks,
    /// per-layer init, restarts). Same (seed, label) always gives the same
    /// stream.
    pub fn fork(&self, label: u64) -> Self {
        let mut child = Self::new(self.state ^ label.wrapping_mul(0xA076_1D64_78BD_642F));
        // burn one output so fork(0) differs from the parent
        child.next_u64();
        child
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) with 53 bits of mantissa.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in [0, n). Multiply-shift bounding; the bias is below
    /// 2^-64 per draw and irrelevant for sampling masks.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Standard normal via Box-Muller (cosine branch only, so one value
    /// consumes exactly two uniforms).
    pub fn normal(&mut self) -> f64 {
        let u1 = loop {
            let u = self.next_f64();
            if u > 0.0 {
                break u;
            }
        };
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// First `take` entries of a Fisher-Yates shuffle of 0..n.
    pub fn sample_without_replacement(&mut self, n: usize, take: usize) -> Vec<usize> {
        debug_assert!(take <= n);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..take {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(take);
        pool
    }
}
