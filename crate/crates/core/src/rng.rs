//! Deterministic random substreams.
//!
//! Every random draw in the crate comes from a ChaCha20 generator whose
//! 64-bit seed is derived from a master seed and a list of integer keys
//! (realization index, SNR index, packet index, ...) through SplitMix64
//! mixing. A substream depends only on its keys, never on how many other
//! substreams were consumed before it, so ensembles evaluated in parallel
//! give the same numbers as sequential runs.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type SimRng = ChaCha20Rng;

/// One SplitMix64 output step applied to `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with an ordered list of keys into a new seed.
pub fn derive_seed(master: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(splitmix64(master), |acc, &k| {
        splitmix64(acc ^ splitmix64(k.wrapping_add(0xD1B5_4A32_D192_ED03)))
    })
}

/// Generator for the substream `(master, keys...)`.
pub fn substream(master: u64, keys: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, keys))
}

/// Generator seeded directly from a 64-bit seed.
pub fn from_seed(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}
