//! Deterministic, splittable random-number streams.
//!
//! Every stochastic routine in the crate is keyed by a [`SeedSpec`]: a root
//! seed plus a stream id. Identical specs reproduce identical draws on any
//! platform and under any thread schedule; distinct stream ids give
//! statistically independent streams. Parallel code fans out by handing each
//! task its own stream id and merging results in stream-id order.

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;
use serde::{Deserialize, Serialize};

/// Key for one reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub root_seed: u64,
    pub stream_id: u64,
}

impl SeedSpec {
    pub fn new(root_seed: u64, stream_id: u64) -> Self {
        Self { root_seed, stream_id }
    }

    /// Same root, different stream.
    pub fn stream(self, stream_id: u64) -> Self {
        Self { root_seed: self.root_seed, stream_id }
    }

    /// Offset within a reserved stream block (see the `STREAMS_*` constants).
    pub fn substream(self, base: u64, offset: u64) -> Self {
        Self { root_seed: self.root_seed, stream_id: base.wrapping_add(offset) }
    }

    /// Instantiates the generator for this stream.
    pub fn rng(self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let mut state = self.root_seed;
        for chunk in 0..4u64 {
            state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
            let word = splitmix(state ^ splitmix(self.stream_id.wrapping_add(chunk)));
            key[chunk as usize * 8..chunk as usize * 8 + 8].copy_from_slice(&word.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}

/// Stream blocks reserved by the different subsystems, so that replication
/// streams (ids `0..n_grid.len() * R`, fixed by the experiment contract)
/// never collide with auxiliary draws sharing the same root seed.
pub const STREAMS_LIMIT_SAMPLER: u64 = 1 << 40;
pub const STREAMS_CALIBRATION: u64 = 1 << 41;
pub const STREAMS_POPULATION_MC: u64 = 1 << 42;

/// SplitMix64 finalizer; full-period bijective mixer.
pub(crate) fn splitmix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform draw in the open interval (0, 1).
///
/// Rejects the single representable 0.0 so generalized-inverse transforms
/// never see an out-of-domain level.
pub fn uniform_open01(rng: &mut ChaCha8Rng) -> f64 {
    use rand::Rng;
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}
