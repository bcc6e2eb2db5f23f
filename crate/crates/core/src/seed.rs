//! Deterministic seed derivation for replicate-level random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Default seed used when callers do not supply one.
pub const DEFAULT_SEED: u64 = 20_240_521;

/// Mixes a base seed with a replicate index (SplitMix64 finalizer).
///
/// Replicate `b` always sees the same stream regardless of which thread runs
/// it or in what order replicates are scheduled.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    rng(derive_seed(seed, index))
}
