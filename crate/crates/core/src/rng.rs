//! Counter-based random streams.
//!
//! Every trajectory owns a ChaCha8 stream addressed by `(key, stream)`. The
//! key comes from the master seed and the stream index from the trajectory's
//! position in the ensemble, so any trajectory can be regenerated in isolation
//! and parallel evaluation order never changes the numbers drawn.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Address of one independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamSeed {
    pub key: u64,
    pub stream: u64,
}

impl StreamSeed {
    pub const fn new(key: u64, stream: u64) -> Self {
        Self { key, stream }
    }

    /// Stream `index` of the family rooted at `master_seed`.
    pub const fn child(master_seed: u64, index: u64) -> Self {
        Self::new(master_seed, index)
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.key);
        rng.set_stream(self.stream);
        rng
    }
}

/// SplitMix64 finalizer, used to derive unrelated keys from one master seed.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Key for a labelled sub-family of streams (e.g. one protocol point).
pub fn derive_key(master_seed: u64, label: u64) -> u64 {
    mix64(master_seed ^ mix64(label))
}
