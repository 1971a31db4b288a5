//! Deterministic random streams.
//!
//! A run has one global seed. Each module draws from its own stream derived
//! from `(seed, module name, index)` so that adding draws in one module never
//! shifts the numbers seen by another, and per-particle streams can be used
//! from parallel workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Stable 64-bit key for a stream; independent of platform and toolchain.
pub fn stream_key(seed: u64, module: &str, index: u64) -> u64 {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ fnv1a(module.as_bytes()));
    splitmix64(h ^ index)
}

pub fn stream(seed: u64, module: &str, index: u64) -> StreamRng {
    ChaCha8Rng::seed_from_u64(stream_key(seed, module, index))
}
