//! Reproducible random streams.
//!
//! Every random draw in the crate comes from a stream addressed by
//! `(seed, family, index)`. Two evaluations that use the same address see the
//! same numbers, which is what common random numbers and replay rely on.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for all simulation randomness.
pub type SimRng = ChaCha8Rng;

/// Stream families. Keeping them disjoint means e.g. plant noise never
/// aliases rollout noise for the same episode seed.
pub mod family {
    pub const ROLLOUT: u64 = 0x524f_4c4c;
    pub const PROPAGATION: u64 = 0x5052_4f50;
    pub const PLANT: u64 = 0x504c_4e54;
    pub const MEASUREMENT: u64 = 0x4d45_4153;
    pub const FRICTION: u64 = 0x4652_4943;
    pub const PSI: u64 = 0x5053_4931;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed; used to give each control step its own block of
/// rollout streams.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    splitmix64(seed ^ splitmix64(salt))
}

/// Opens stream `index` of `family` under `seed`.
pub fn stream_rng(seed: u64, family: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, family));
    rng.set_stream(index);
    rng
}
