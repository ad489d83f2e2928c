//! Seed fan-out. Every random stream (initialization, folds, shuffling,
//! augmentation) is derived from one base seed plus a fixed purpose tag, so
//! each component can be reproduced on its own.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const INIT: &str = "init";
pub const FOLDS: &str = "folds";
pub const SHUFFLE: &str = "shuffle";
pub const AUGMENT: &str = "augment";

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a of a tag, used to separate purposes.
fn tag_hash(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Stable seed for `(base, purpose, index...)`.
pub fn derive(base: u64, purpose: &str, indices: &[u64]) -> u64 {
    let mut s = splitmix64(base ^ splitmix64(tag_hash(purpose)));
    for &i in indices {
        s = splitmix64(s ^ splitmix64(i.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    s
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(base: u64, purpose: &str, indices: &[u64]) -> Rng {
    rng(derive(base, purpose, indices))
}

/// Seed for a parameter's initializer, keyed by its name so that adding or
/// reordering parameters does not change the others.
pub fn for_name(base: u64, name: &str) -> u64 {
    derive(base, INIT, &[tag_hash(name)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn purposes_and_indices_separate() {
        assert_ne!(derive(1, SHUFFLE, &[0]), derive(1, AUGMENT, &[0]));
        assert_ne!(derive(1, SHUFFLE, &[0]), derive(1, SHUFFLE, &[1]));
        assert_ne!(derive(1, SHUFFLE, &[0, 1]), derive(1, SHUFFLE, &[1, 0]));
        assert_eq!(derive(7, FOLDS, &[3]), derive(7, FOLDS, &[3]));
    }
}
