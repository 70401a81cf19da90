//! Named, independent random substreams derived from one run seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub const DEFAULT_SEED: u64 = 0x5eed_2024;

/// FNV-1a, used only to map stream names to stable stream ids.
fn stream_id(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Each named stream is a separate ChaCha stream under the same key, so adding
/// a new draw site never shifts the values another site sees.
pub fn substream(seed: u64, name: &str) -> SimRng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream_id(name));
    r
}
