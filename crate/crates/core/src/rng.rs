//! Seed derivation.
//!
//! Every stochastic object in the crate is addressed by a tuple of integers
//! (master seed, block id, trial index, ...). The tuple is folded into a
//! single 64-bit seed with SplitMix64 finalizers, and block-level substreams
//! use ChaCha's native stream selector so sampling order never matters.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used everywhere in the crate.
pub type CsRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a tuple of integers into one seed. Order-sensitive.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5354_5243_5453_4353_u64, |acc, &p| {
        splitmix64(acc ^ splitmix64(p))
    })
}

/// Stable 64-bit FNV-1a hash, used to key seeds by names.
pub fn name_key(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325_u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn rng_from_seed(seed: u64) -> CsRng {
    CsRng::seed_from_u64(seed)
}

/// Independent substream `stream` of the generator seeded with `seed`.
pub fn substream(seed: u64, stream: u64) -> CsRng {
    let mut rng = CsRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
