//! Keyed random streams.
//!
//! Every stream is addressed by `(seed, lane, index)`: the lane is a mode
//! number or a reserved purpose tag and the index a path or replicate
//! number. ChaCha is counter based, so a stream can be opened directly
//! without generating its predecessors, and results do not depend on how
//! work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type StreamRng = ChaCha12Rng;

/// Lane reserved for bootstrap resampling.
pub const BOOTSTRAP_LANE: u64 = u64::MAX;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derived 64-bit key for `(seed, lane)`; used as the per-mode seed in field runs.
pub fn derive_key(seed: u64, lane: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ lane.rotate_left(17) ^ 0x5851_f42d_4c95_7f2d)
}

pub fn stream(seed: u64, lane: u64, index: u64) -> StreamRng {
    let key = derive_key(seed, lane);
    let mut bytes = [0u8; 32];
    let mut z = key;
    for chunk in bytes.chunks_mut(8) {
        z = splitmix64(z);
        chunk.copy_from_slice(&z.to_le_bytes());
    }
    let mut rng = StreamRng::from_seed(bytes);
    rng.set_stream(index);
    rng
}
