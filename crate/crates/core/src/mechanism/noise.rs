use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};

/// The generator behind every noise draw: ChaCha12 seeded from a `u64`,
/// with independent streams selected by index.
pub type NoiseRng = ChaCha12Rng;

/// SplitMix64 step, used to derive per-run seeds.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream_rng(seed: u64, stream: u64) -> NoiseRng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One draw from Lap(σ) by inverse CDF.
pub fn laplace(rng: &mut impl Rng, scale: f64) -> f64 {
    loop {
        let u: f64 = rng.gen::<f64>() - 0.5;
        if u > -0.5 {
            return -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln();
        }
    }
}

/// Seeded Laplace sampler.
#[derive(Clone, Debug)]
pub struct LaplaceSampler {
    scale: f64,
    rng: NoiseRng,
}

impl LaplaceSampler {
    pub fn new(scale: f64, seed: u64) -> Result<Self> {
        LaplaceSampler::with_stream(scale, seed, 0)
    }

    pub fn with_stream(scale: f64, seed: u64, stream: u64) -> Result<Self> {
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::invalid(format!("Laplace scale must be finite and nonnegative, got {scale}")));
        }
        Ok(LaplaceSampler { scale, rng: stream_rng(seed, stream) })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn sample(&mut self) -> f64 {
        laplace(&mut self.rng, self.scale)
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.sample();
        }
    }
}

/// Where a mechanism's randomness comes from: a seed, or nowhere (noise
/// disabled, for checking reconstructions).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoiseSource {
    seed: u64,
    enabled: bool,
}

impl NoiseSource {
    pub fn seeded(seed: u64) -> Self {
        NoiseSource { seed, enabled: true }
    }

    pub fn noiseless() -> Self {
        NoiseSource { seed: 0, enabled: false }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    /// Generator for one independent stream (a partition, a layer, ...).
    /// `None` when noise is disabled.
    pub fn rng(&self, stream: u64) -> Option<NoiseRng> {
        self.enabled.then(|| stream_rng(self.seed, stream))
    }
}

impl From<u64> for NoiseSource {
    fn from(seed: u64) -> Self {
        NoiseSource::seeded(seed)
    }
}
