//! Deterministic, counter-based random streams.
//!
//! Every random decision in the toolkit is drawn from a [`SampleRng`] whose
//! seed is derived from `(master_seed, sample_id, op_name)` by
//! [`SeedContext::stream_seed`]. The generator is `splitmix64-ctr-v1`:
//!
//! * key derivation: FNV-1a 64 over the byte string
//!   `le64(master_seed) || 0x00 || utf8(sample_id) || 0x00 || utf8(op_name)`,
//!   followed by the SplitMix64 finalizer;
//! * output `i` (0-based) is `mix(key + (i + 1) * 0x9E3779B97F4A7C15)`, where
//!   `mix` is the SplitMix64 finalizer;
//! * uniform `f64` in `[0, 1)` is `(out >> 11) * 2^-53`;
//! * normals use the Box-Muller transform on two consecutive uniforms and keep
//!   only the cosine branch, so one normal always consumes exactly two outputs;
//! * bounded integers use rejection sampling on the full 64-bit output.
//!
//! All of this is plain integer arithmetic and IEEE-754 double operations, so
//! a port to another language reproduces the same streams.

use std::f64::consts::PI;

/// Version tag of the stream construction documented above.
pub const GENERATOR_NAME: &str = "splitmix64-ctr-v1";

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[inline]
fn splitmix_finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(state: u64, bytes: &[u8]) -> u64 {
    bytes.iter().fold(state, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Master seed plus the identity of the sample being processed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SeedContext {
    pub master_seed: u64,
    pub sample_id: String,
}

impl SeedContext {
    pub fn new(master_seed: u64, sample_id: impl Into<String>) -> Self {
        Self {
            master_seed,
            sample_id: sample_id.into(),
        }
    }

    /// Same master seed, different sample id.
    pub fn child(&self, sample_id: impl Into<String>) -> Self {
        Self::new(self.master_seed, sample_id)
    }

    /// Stable 64-bit key for the `(master_seed, sample_id, op_name)` triple.
    pub fn stream_seed(&self, op_name: &str) -> u64 {
        let mut h = fnv1a(FNV_OFFSET, &self.master_seed.to_le_bytes());
        h = fnv1a(h, &[0]);
        h = fnv1a(h, self.sample_id.as_bytes());
        h = fnv1a(h, &[0]);
        h = fnv1a(h, op_name.as_bytes());
        splitmix_finalize(h)
    }

    pub fn rng(&self, op_name: &str) -> SampleRng {
        SampleRng::from_key(self.stream_seed(op_name))
    }
}

/// Counter-based generator; see the module docs for the exact construction.
#[derive(Debug, Clone)]
pub struct SampleRng {
    key: u64,
    counter: u64,
}

impl SampleRng {
    pub fn from_key(key: u64) -> Self {
        Self { key, counter: 0 }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        splitmix_finalize(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi]` (for `lo == hi` returns `lo` while still consuming one output).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = self.next_f64();
        let v = lo + (hi - lo) * u;
        v.clamp(lo.min(hi), lo.max(hi))
    }

    /// Uniform integer in `[0, n)`. Panics if `n == 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        // Largest multiple of n that fits; reject the tail to stay unbiased.
        let zone = u64::MAX - (u64::MAX % n + 1) % n;
        loop {
            let x = self.next_u64();
            if x <= zone {
                return x % n;
            }
        }
    }

    /// Uniform integer in the inclusive range `[lo, hi]`.
    pub fn range_inclusive(&mut self, lo: u64, hi: u64) -> u64 {
        assert!(lo <= hi, "empty range {lo}..={hi}");
        match (hi - lo).checked_add(1) {
            Some(span) => lo + self.below(span),
            None => self.next_u64(),
        }
    }

    /// Standard normal via Box-Muller (cosine branch).
    pub fn standard_normal(&mut self) -> f64 {
        // 1 - u keeps the log argument in (0, 1].
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    }

    pub fn normal(&mut self, mean: f64, std_dev: f64) -> f64 {
        mean + std_dev * self.standard_normal()
    }

    /// Fisher-Yates shuffle driven by [`Self::below`].
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
