//! Seed derivation. Every random stream is a ChaCha8 generator keyed by the
//! run seed and a purpose tag, with the step or item index as its stream id,
//! so any step can be replayed without replaying its predecessors.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TAG_INIT: u64 = 1;
pub const TAG_STEP: u64 = 2;
pub const TAG_EPOCH: u64 = 3;
pub const TAG_SAMPLE: u64 = 4;
pub const TAG_DEMO: u64 = 5;
pub const TAG_TRIAL: u64 = 6;
pub const TAG_SCENE: u64 = 7;

pub fn stream_rng(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&tag.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
