//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by a
//! 64-bit seed and a stream id. A simulation replicate derives its own seed
//! with [`replicate_seed`] and then uses one stream per purpose, so changing
//! how many numbers one stage consumes never shifts the draws of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Community labels of a simulated graph.
pub const STREAM_LABELS: u64 = 1;
/// Popularity parameters of a simulated graph.
pub const STREAM_POPULARITY: u64 = 2;
/// Bernoulli edge draws.
pub const STREAM_ADJACENCY: u64 = 3;
/// Initialisation of the final mixture / k-means clustering.
pub const STREAM_CLUSTERING: u64 = 4;

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed of replicate `replicate` in grid cell `(n, k)`: `base ^ hash(n, k, replicate)`.
///
/// The hash is a fixed splitmix64 chain, stable across platforms and releases.
pub fn replicate_seed(base: u64, n: usize, k: usize, replicate: usize) -> u64 {
    let h = splitmix64(splitmix64(splitmix64(n as u64) ^ k as u64) ^ replicate as u64);
    base ^ h
}
