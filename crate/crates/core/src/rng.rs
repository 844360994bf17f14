//! Seeded, splittable random streams.
//!
//! Every stochastic operation draws from a ChaCha8 generator (a counter-based
//! stream cipher). A sub-stream is addressed by `(seed, tag, index)`: the key is
//! derived from `seed` and the 64-bit stream id is `mix(fnv1a(tag) ^ mix(index))`.
//! Distinct tags or indices therefore never share a keystream, and a parallel
//! loop that addresses its work items by index is reproducible regardless of
//! scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn stream_id(tag: &str, index: u64) -> u64 {
    mix64(fnv1a(tag) ^ mix64(index))
}

pub fn substream(seed: u64, tag: &str, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(tag, index));
    rng
}

/// A fresh 64-bit seed for a nested operation that itself takes a seed.
pub fn derive_seed(seed: u64, tag: &str, index: u64) -> u64 {
    mix64(seed ^ stream_id(tag, index))
}
