//! Seed derivation. Every stochastic step in the pipeline draws from a
//! ChaCha stream keyed by a seed derived from the master seed and a fixed
//! tag path, so results do not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type PipelineRng = ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Mixes `tags` into `seed` one at a time.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn rng_from_seed(seed: u64) -> PipelineRng {
    ChaCha8Rng::seed_from_u64(seed)
}

// Domain tags used with `derive_seed`.
pub mod tags {
    pub const ORIENTATION: u64 = 1;
    pub const RIDGES: u64 = 2;
    pub const IMPRESSIONS: u64 = 3;
    pub const FREQUENCY: u64 = 4;
    pub const AE_INIT: u64 = 10;
    pub const AE_SHUFFLE: u64 = 11;
    pub const DEC_INIT: u64 = 12;
    pub const DEC_SHUFFLE: u64 = 13;
    pub const SPLIT: u64 = 14;
    pub const TRAIN_KEYS: u64 = 20;
    pub const EVAL_KEYS: u64 = 21;
    pub const SHARE_SPLIT: u64 = 22;
    pub const IMPOSTOR_SAMPLE: u64 = 23;
    pub const REVOKE_KEYS: u64 = 24;
    pub const ENROLL_KEYS: u64 = 25;
    pub const STAGE_AE: u64 = 30;
    pub const STAGE_MATRICES: u64 = 31;
    pub const STAGE_DECODER: u64 = 32;
    pub const STAGE_EVAL: u64 = 33;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivation_is_tag_sensitive() {
        let a = derive_seed(7, &[1, 2]);
        assert_eq!(a, derive_seed(7, &[1, 2]));
        assert_ne!(a, derive_seed(7, &[2, 1]));
        assert_ne!(a, derive_seed(8, &[1, 2]));
    }
}
