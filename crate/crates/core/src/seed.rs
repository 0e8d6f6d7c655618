//! Reproducible seed derivation.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 stream whose
//! seed is `derive(root, label, index)`. Streams for different purposes (the
//! environment, the intrinsic Brownian motion, the k-th Monte Carlo sample)
//! are therefore independent of each other and of execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// 64-bit reproducibility token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Seed(pub u64);

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Seed {
    /// Child seed for the stream `(label, index)` under this root.
    pub fn derive(self, label: &str, index: u64) -> Seed {
        let mut h = FNV_OFFSET;
        for b in label.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(FNV_PRIME);
        }
        let mixed = splitmix64(self.0 ^ splitmix64(h));
        Seed(splitmix64(mixed ^ splitmix64(index.wrapping_add(0x5851_f42d_4c95_7f2d))))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

impl From<u64> for Seed {
    fn from(v: u64) -> Self {
        Seed(v)
    }
}

impl std::fmt::Display for Seed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn derivation_is_deterministic_and_label_sensitive() {
        let root = Seed(42);
        assert_eq!(root.derive("env", 3), root.derive("env", 3));
        assert_ne!(root.derive("env", 3), root.derive("env", 4));
        assert_ne!(root.derive("env", 3), root.derive("walk", 3));
        assert_ne!(Seed(43).derive("env", 3), root.derive("env", 3));
    }

    #[test]
    fn derived_seeds_do_not_collide_over_a_large_index_range() {
        let root = Seed(7);
        let seen: HashSet<u64> = (0..100_000).map(|i| root.derive("sample", i).0).collect();
        assert_eq!(seen.len(), 100_000);
    }
}
