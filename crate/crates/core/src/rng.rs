//! Deterministic random-stream splitting.
//!
//! Every stochastic component gets its own ChaCha8 stream whose seed is
//! derived from the run's base seed, a purpose tag and a tuple of indices
//! (restart, time step, particle, ...). Work can therefore be spread over
//! any number of threads without changing a single draw.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the tag bytes.
fn tag_hash(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Child seed for `(tag, indices)` under `base`.
pub fn derive_seed(base: u64, tag: &str, indices: &[u64]) -> u64 {
    let mut h = splitmix64(base ^ tag_hash(tag));
    for &i in indices {
        h = splitmix64(h ^ splitmix64(i.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    h
}

pub fn stream(base: u64, tag: &str, indices: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(base, tag, indices))
}
