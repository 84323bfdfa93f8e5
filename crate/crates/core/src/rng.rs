//! Seeding helpers. Every random draw in the crate flows from an explicit
//! `u64` seed so that whole experiments replay bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for one Monte-Carlo trial: `master ^ trial`.
pub fn trial_rng(master_seed: u64, trial_index: u64) -> SimRng {
    seeded(master_seed ^ trial_index)
}

/// Derives a sub-seed for a named purpose (training, held-out sets, ...),
/// so streams used for different jobs never coincide.
pub fn derive_seed(master_seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = master_seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
