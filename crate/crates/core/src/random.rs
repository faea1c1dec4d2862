//! Reproducible random streams.
//!
//! Every replicate of a Monte Carlo loop draws from its own ChaCha stream keyed
//! by `(seed, domain, index)`, so results do not depend on evaluation order or
//! on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub(crate) const DOMAIN_INTERVALS: u64 = 1;
pub(crate) const DOMAIN_THRESHOLD: u64 = 2;
pub(crate) const DOMAIN_QUANTILES: u64 = 3;
pub(crate) const DOMAIN_SIZE_POWER: u64 = 4;
pub(crate) const DOMAIN_MULTI_CP: u64 = 5;
pub(crate) const DOMAIN_AR1: u64 = 6;

pub fn stream_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let key = seed ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}

pub fn standard_normals<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Uniform draws on `[-1/2, 1/2)`.
pub fn centered_uniforms<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>() - 0.5).collect()
}
