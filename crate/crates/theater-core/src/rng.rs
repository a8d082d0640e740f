//! Deterministic 64-bit randomness used everywhere a draw is needed.
//!
//! The generator is SplitMix64: state advances by `0x9E3779B97F4A7C15` per
//! draw and each output is mixed with two multiply-xorshift rounds
//! (`0xBF58476D1CE4E5B9`, `0x94D049BB133111EB`). Seeds for individual
//! records are derived as `splitmix64_once(master_seed ^ fnv1a64(key))`
//! where `fnv1a64` is the 64-bit FNV-1a hash of the key bytes; the key for
//! corpus records is `"<dataset_id>/<record_id>"` and for mock-judge draws
//! `"<task_id>|<bias_kind>"`.
//!
//! All of this is plain integer arithmetic, so the same seeds produce the
//! same draws on every platform. Tests pin the published reference vectors
//! for both algorithms.

/// 64-bit FNV-1a over raw bytes.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// One SplitMix64 step: advance `seed` once and return the mixed output.
pub fn splitmix64_once(seed: u64) -> u64 {
    SplitMix64::new(seed).next_u64()
}

/// Seed for a keyed sub-stream of `master`.
pub fn derive_seed(master: u64, key: &str) -> u64 {
    splitmix64_once(master ^ fnv1a64(key.as_bytes()))
}

/// SplitMix64 stream.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[0, n)` by modulo reduction. The reduction bias is
    /// below 2^-59 for the option counts used here (n ≤ 10) and the rule is
    /// part of the documented draw protocol, so oracles can replay it.
    pub fn next_below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "next_below requires n > 0");
        self.next_u64() % n
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn next_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Fair coin from the low bit of the next draw.
    pub fn next_bool(&mut self) -> bool {
        self.next_u64() & 1 == 0
    }
}
