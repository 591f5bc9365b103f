//! Deterministic random streams.
//!
//! Every parallel unit of work gets its own ChaCha stream keyed by a hash of
//! its identity, so serial and parallel execution produce identical bits.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Order-sensitive hash over a sequence of words.
pub fn hash_words(words: impl IntoIterator<Item = u64>) -> u64 {
    words
        .into_iter()
        .fold(0x6a09_e667_f3bc_c908, |acc, w| mix64(acc ^ mix64(w)))
}

pub fn hash_f64s(values: &[f64]) -> u64 {
    hash_words(values.iter().map(|v| v.to_bits()))
}

pub fn stream(seed: u64, key: &[u64]) -> Rng {
    let h = hash_words(std::iter::once(seed).chain(key.iter().copied()));
    Rng::seed_from_u64(h)
}
