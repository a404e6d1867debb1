//! Deterministic pseudo-random generator with checkpointable state.
//!
//! xoshiro256** seeded through SplitMix64. The whole generator state is four
//! u64 words, which go verbatim into checkpoints so a resumed run draws the
//! exact same stream as an uninterrupted one. Every sampling helper consumes
//! a fixed number of raw draws, so the state advance per call is predictable.

const SPLITMIX_GAMMA: u64 = 0x9e3779b97f4a7c15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(SPLITMIX_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Mix several seed components into one 64-bit seed.
///
/// Used to derive independent per-sample and per-run streams from
/// (seed, tag, index) tuples.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut state = 0x243f6a8885a308d3; // arbitrary nonzero start
    let mut out = 0;
    for &p in parts {
        let mut part_state = p;
        state ^= splitmix64(&mut part_state);
        out = splitmix64(&mut state);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    s: [u64; 4],
}

impl Rng {
    pub fn seed_from(seed: u64) -> Self {
        let mut sm = seed;
        let mut s = [0u64; 4];
        for w in &mut s {
            *w = splitmix64(&mut sm);
        }
        if s == [0, 0, 0, 0] {
            s[0] = SPLITMIX_GAMMA;
        }
        Rng { s }
    }

    /// Derive a stream from several components, e.g. (dataset seed, task, index).
    pub fn from_parts(parts: &[u64]) -> Self {
        Rng::seed_from(derive_seed(parts))
    }

    pub fn state(&self) -> [u64; 4] {
        self.s
    }

    pub fn from_state(s: [u64; 4]) -> Self {
        Rng { s }
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform in [0, 1) with 53 bits of precision. One raw draw.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi). One raw draw.
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in [0, n). One raw draw. n must be nonzero.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Bernoulli(p). One raw draw.
    pub fn chance(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Standard normal via Box-Muller. Always two raw draws, no caching,
    /// so the state advance is the same on every call.
    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform().max(f64::MIN_POSITIVE);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
