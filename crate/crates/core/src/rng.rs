//! Seeding helpers.
//!
//! Every random stream in the crate is a `ChaCha8Rng` seeded through
//! `SeedableRng::seed_from_u64`. Child seeds are derived with the splitmix64
//! finalizer so that independent cells (repeats, tasks, grid points) never
//! share a stream and do not depend on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// splitmix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a sequence of words into one seed: `h = splitmix64(h ^ w)` per word,
/// starting from `splitmix64(base)`.
pub fn derive(base: u64, words: &[u64]) -> u64 {
    words
        .iter()
        .fold(splitmix64(base), |h, &w| splitmix64(h ^ w))
}
