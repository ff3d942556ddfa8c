//! Deterministic seed derivation.
//!
//! Every random draw in the crate comes from a ChaCha8 stream whose seed is a
//! stable hash of `(master, iteration, index)`. Streams never share state, so
//! results are identical at any thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags used in the `index` slot for non-particle draws.
pub mod stream {
    pub const HERDING: u64 = 0xFFFF_0001;
    pub const DATA_ERROR: u64 = 0xFFFF_0002;
    pub const OBSERVED: u64 = 0xFFFF_0003;
    pub const SPLIT: u64 = 0xFFFF_0004;
    pub const SUBSAMPLE: u64 = 0xFFFF_0005;
    pub const BASELINE: u64 = 0xFFFF_0006;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a master seed with two counters into a derived seed.
pub fn derive_seed(master: u64, iteration: u64, index: u64) -> u64 {
    let h = splitmix64(master);
    let h = splitmix64(h ^ iteration.wrapping_mul(0xD1B5_4A32_D192_ED03));
    splitmix64(h ^ index.wrapping_mul(0x8CB9_2BA7_2F3D_8DD7))
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(master: u64, iteration: u64, index: u64) -> ChaCha8Rng {
    rng_from_seed(derive_seed(master, iteration, index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derivation_is_stable() {
        assert_eq!(derive_seed(7, 3, 11), derive_seed(7, 3, 11));
        let mut a = derived_rng(42, 1, 2);
        let mut b = derived_rng(42, 1, 2);
        let va: Vec<u64> = (0..8).map(|_| a.random()).collect();
        let vb: Vec<u64> = (0..8).map(|_| b.random()).collect();
        assert_eq!(va, vb);
    }

    #[test]
    fn counters_separate_streams() {
        let base = derive_seed(42, 0, 0);
        assert_ne!(base, derive_seed(42, 0, 1));
        assert_ne!(base, derive_seed(42, 1, 0));
        assert_ne!(base, derive_seed(43, 0, 0));
        // swapping the counters must not collide
        assert_ne!(derive_seed(42, 1, 2), derive_seed(42, 2, 1));
    }

    proptest::proptest! {
        #[test]
        fn distinct_counters_give_distinct_seeds(
            master in proptest::prelude::any::<u64>(),
            it in 0u64..1_000_000,
            idx in 0u64..1_000_000,
            bump in 1u64..1000,
        ) {
            let s = derive_seed(master, it, idx);
            proptest::prop_assert_ne!(s, derive_seed(master, it, idx + bump));
            proptest::prop_assert_ne!(s, derive_seed(master, it + bump, idx));
            proptest::prop_assert_ne!(s, derive_seed(master.wrapping_add(bump), it, idx));
        }
    }
}
