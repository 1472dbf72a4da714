//! Seeded pseudo-random generation.
//!
//! Every stochastic entry point takes an explicit [`EsRng`]. The generator is
//! ChaCha8, a counter-based stream cipher, so independent replicates are
//! obtained by selecting a different stream of the same seed rather than by
//! re-seeding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type EsRng = ChaCha8Rng;

/// Generator for `seed` on stream 0.
pub fn seeded(seed: u64) -> EsRng {
    EsRng::seed_from_u64(seed)
}

/// Generator for `seed` on an independent `stream`.
pub fn substream(seed: u64, stream: u64) -> EsRng {
    let mut rng = EsRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Fill `out` with independent standard normal draws.
pub fn fill_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}
