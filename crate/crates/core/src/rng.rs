//! Deterministic, splittable random streams.
//!
//! Every random draw in the crate goes through an [`RngStream`], a
//! `(seed, stream_id)` pair backed by a ChaCha8 counter-mode generator. The
//! same pair always yields the same sample sequence, so Monte Carlo results do
//! not depend on scheduling or on the number of worker threads.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Identifies one independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Stream whose id is a stable hash of `parts`.
    pub fn derived(seed: u64, parts: &[u64]) -> Self {
        Self::new(seed, stream_hash(parts))
    }

    /// Instantiate the generator positioned at the start of the stream.
    pub fn generator(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable 64-bit hash of a sequence of words (independent of platform and
/// of the standard library's hasher seed).
pub fn stream_hash(parts: &[u64]) -> u64 {
    parts.iter().fold(0x243F_6A88_85A3_08D3, |acc, &p| {
        splitmix64(acc ^ splitmix64(p))
    })
}

/// Circularly symmetric complex Gaussian sample with `E|z|^2 = variance`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}
