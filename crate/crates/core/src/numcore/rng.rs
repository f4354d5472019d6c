//! splitmix64 generator with Box-Muller normals.
//!
//! The whole toolkit draws randomness from this one generator so that forest
//! structures, network initializations and random baselines reproduce
//! bit-for-bit on every platform and thread count.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The splitmix64 output function.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed }
    }

    pub fn state(&self) -> u64 {
        self.state
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform in [0, 1) from the top 53 bits.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal. One Box-Muller pair per call; the sine branch is dropped
    /// so the generator state stays a single u64.
    pub fn gaussian(&mut self) -> f64 {
        // u1 in (0, 1]: ln never sees zero
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform integer in [0, n). `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // multiply-shift: bias is < n / 2^64
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Independent child stream; does not advance `self`.
    pub fn split(&self, stream: u64) -> Rng {
        Rng::new(mix64((self.state ^ stream).wrapping_add(GOLDEN_GAMMA)))
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// Functional form: returns the draw and the advanced state.
pub fn next_uniform(state: Rng) -> (f64, Rng) {
    let mut s = state;
    let u = s.uniform();
    (u, s)
}

pub fn next_gaussian(state: Rng) -> (f64, Rng) {
    let mut s = state;
    let g = s.gaussian();
    (g, s)
}
