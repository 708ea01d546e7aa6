//! Seed derivation shared by the simulators.
//!
//! Every generator is a ChaCha8 stream keyed by a derived seed, so a
//! component's random numbers depend only on `(master seed, domain, key)` and
//! never on how many other components drew before it.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub(crate) const DOMAIN_SHADOWING: u64 = 1;
pub(crate) const DOMAIN_SUBJECTS: u64 = 2;
pub(crate) const DOMAIN_FIELD: u64 = 3;
pub(crate) const DOMAIN_DEVICES: u64 = 4;

/// Derives an independent 64-bit seed for `domain` from `seed`.
pub(crate) fn derive_seed(seed: u64, domain: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(domain);
    rng.next_u64()
}

/// Generator for `key` within the stream family rooted at `seed`.
pub(crate) fn keyed_rng(seed: u64, key: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(key);
    rng
}
