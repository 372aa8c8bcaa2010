//! Seed derivation and the RNG type used everywhere.
//!
//! All stochastic components (parameter init, environments, action
//! sampling, minibatch shuffling) draw from independent ChaCha streams
//! derived from one run seed, so runs are reproducible bit-for-bit across
//! machines.

use rand_chacha::rand_core::SeedableRng;

pub type Rng = rand_chacha::ChaCha8Rng;

/// Derive an independent stream from a base seed and a label.
///
/// splitmix64 over the base seed mixed with an FNV-1a hash of the label;
/// cheap, portable, and stable across versions of this crate's deps.
pub fn subseed(base: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(base ^ h)
}

pub fn rng_from(base: u64, label: &str) -> Rng {
    Rng::seed_from_u64(subseed(base, label))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
