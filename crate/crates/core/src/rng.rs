//! Seed derivation.
//!
//! Every stochastic component draws from a `ChaCha8Rng` seeded with
//! `derive_seed(run_seed, tag)`, where `tag` names the component
//! (for example `"folds"` or `"dropout/round-3"`). The derivation is
//! FNV-1a over the tag bytes, xor-ed into the run seed and finished with
//! the SplitMix64 mixer, so sub-seeds can be recomputed from the run seed
//! alone in any language.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut h = FNV_OFFSET;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(seed ^ h)
}

pub fn component_rng(seed: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag))
}
