//! Deterministic seeding.
//!
//! Every random component draws from its own stream derived from the run
//! seed and a component label, so changing one component (say, the number of
//! folds) does not perturb the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a named sub-seed. `index` distinguishes repeated components
/// (e.g. one stream per fold).
pub fn sub_seed(seed: u64, label: &str, index: u64) -> u64 {
    // FNV-1a over the label
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(seed ^ splitmix64(h ^ splitmix64(index)))
}

pub fn rng_for(seed: u64, label: &str, index: u64) -> Rng {
    Rng::seed_from_u64(sub_seed(seed, label, index))
}
