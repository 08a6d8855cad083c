//! Seed derivation.
//!
//! All randomness is keyed by a 64-bit seed. Per-site and per-realization
//! streams are derived with the splitmix64 finalizer so that a lattice site
//! draws the same value no matter which box it is enumerated from.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// One splitmix64 step applied to `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of realization `index` in an ensemble: `splitmix64(master + index)`.
pub fn realization_seed(master: u64, index: u64) -> u64 {
    splitmix64(master.wrapping_add(index))
}

/// Key for lattice site `site` under `seed`.
pub fn site_key(seed: u64, site: &[i64]) -> u64 {
    let mut h = splitmix64(seed ^ 0xA076_1D64_78BD_642F);
    for &c in site {
        h = splitmix64(h ^ (c as u64).wrapping_mul(0xE703_7ED1_A0B4_28DB));
    }
    h
}

/// Uniform draw in `[0, 1)` from a 64-bit key, using the top 53 bits.
pub fn unit_interval(key: u64) -> f64 {
    (key >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn stream(key: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(key)
}
