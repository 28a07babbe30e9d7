//! Counter-based random substreams.
//!
//! Every random quantity in the crate is drawn from a stream addressed by a
//! master seed plus a path of counters (repetition, tree index, ...). Two
//! streams with the same address are identical no matter which thread asks
//! for them or in which order, which is what makes parallel sweeps
//! reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for all sampling in this crate.
pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a counter path into a single 64-bit stream id.
pub fn stream_id(path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(path.len() as u64), |acc, &c| {
            splitmix64(acc ^ splitmix64(c))
        })
}

/// Derives the seed value recorded for a substream (useful in output files).
pub fn derived_seed(master: u64, path: &[u64]) -> u64 {
    splitmix64(master ^ stream_id(path))
}

/// Returns the substream of `master` addressed by `path`.
pub fn substream(master: u64, path: &[u64]) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream_id(path));
    rng
}
