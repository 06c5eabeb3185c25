//! Seed derivation and per-purpose random streams.
//!
//! Every random draw in the crate comes from a ChaCha stream keyed by a
//! 64-bit seed and split by a purpose tag and an index, so results never
//! depend on call order or thread schedule.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags. Distinct tags give statistically independent streams for one seed.
pub(crate) mod tag {
    pub const SVD_START: u64 = 0x5356_445f_5354_4152;
    pub const DIRECTION: u64 = 0x4449_5245_4354_494f;
    pub const ENDMEMBERS: u64 = 0x454e_444d_454d_4245;
    pub const ABUNDANCES: u64 = 0x4142_554e_4441_4e43;
    pub const NOISE: u64 = 0x4e4f_4953_455f_5f5f;
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a sequence of words into one seed. Order matters.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(mix64(base), |acc, &p| mix64(acc ^ mix64(p)))
}

/// Independent stream `index` of purpose `tag` under `seed`.
pub fn stream(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[tag]));
    rng.set_stream(index);
    rng
}
