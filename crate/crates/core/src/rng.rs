//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream
//! ([`rand_chacha::ChaCha8Rng`], a counter-based generator) seeded with a
//! 64-bit value. Independent sub-streams are obtained by mixing a master seed
//! with a list of tags through the SplitMix64 finalizer, so adding a new
//! consumer never perturbs existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Domain tags for derived streams.
pub mod tag {
    pub const NOISE_TRAIN: u64 = 0x6e6f_6973_6574_726e;
    pub const NOISE_VAL: u64 = 0x6e6f_6973_6576_616c;
    pub const SUBSAMPLE: u64 = 0x7375_6273_616d_706c;
    pub const SPLIT: u64 = 0x7370_6c69_7400_0000;
    pub const SHUFFLE: u64 = 0x7368_7566_666c_6500;
    pub const INIT: u64 = 0x696e_6974_0000_0000;
    pub const DATA: u64 = 0x6461_7461_0000_0000;
    pub const METHOD: u64 = 0x6d65_7468_6f64_0000;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `parts` into `seed`, order-sensitively.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_stream(seed: u64, parts: &[u64]) -> Rng {
    stream(derive_seed(seed, parts))
}

/// Stable 64-bit key for a real-valued grid coordinate.
pub fn real_key(v: f64) -> u64 {
    v.to_bits()
}

/// Stable 64-bit key for a short string.
pub fn str_key(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn derived_streams_are_reproducible_and_distinct() {
        let a: u64 = derived_stream(7, &[1, 2]).random();
        let b: u64 = derived_stream(7, &[1, 2]).random();
        let c: u64 = derived_stream(7, &[2, 1]).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
