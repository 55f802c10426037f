//! Deterministic random streams.
//!
//! Every independent unit of work (an episode, a rollout, a scenario draw)
//! gets its own generator derived from `(master seed, purpose tag, index)`:
//!
//! ```text
//! key    = splitmix64(master ^ splitmix64(tag))
//! rng    = ChaCha8Rng::seed_from_u64(key)
//! stream = index            (ChaCha stream id, i.e. a counter-based split)
//! ```
//!
//! Results therefore never depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Purpose tags. Distinct tags give statistically independent stream families.
pub mod tag {
    pub const DATA: u64 = 1;
    pub const MODEL_ROLLOUT: u64 = 2;
    pub const COUNTERFACTUAL: u64 = 3;
    pub const TRUE_EVAL: u64 = 4;
    pub const REAL_EPISODE: u64 = 5;
    pub const CATALOGUE: u64 = 6;
    pub const CORRUPTION: u64 = 7;
    pub const VERIFY: u64 = 8;
    pub const IMPROVE: u64 = 9;
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStream {
    master: u64,
}

impl SeedStream {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn rng(&self, tag: u64, index: u64) -> Rng {
        let mut rng = Rng::seed_from_u64(splitmix64(self.master ^ splitmix64(tag)));
        rng.set_stream(index);
        rng
    }

    /// A child stream family, e.g. one per iteration of an outer loop.
    pub fn child(&self, tag: u64, index: u64) -> SeedStream {
        SeedStream::new(splitmix64(splitmix64(self.master ^ splitmix64(tag)) ^ splitmix64(index.wrapping_add(0x5851_F42D))))
    }
}
