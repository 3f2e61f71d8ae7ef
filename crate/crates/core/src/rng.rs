//! Seed plumbing. Every stochastic operation takes an explicit seed; streams
//! for individual traces are derived from a master seed by counter so that
//! results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type DetRng = ChaCha8Rng;

/// SplitMix64 finalizer over `(master, counter)`.
pub fn derive_seed(master: u64, counter: u64) -> u64 {
    let mut z = master
        .wrapping_add(counter.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_from_seed(seed: u64) -> DetRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derived_streams_differ_and_repeat() {
        assert_ne!(derive_seed(7, 0), derive_seed(7, 1));
        assert_ne!(derive_seed(7, 0), derive_seed(8, 0));
        let a: u64 = rng_from_seed(derive_seed(7, 3)).random();
        let b: u64 = rng_from_seed(derive_seed(7, 3)).random();
        assert_eq!(a, b);
    }
}
