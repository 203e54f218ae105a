//! Seed derivation.
//!
//! Every random choice in the crate comes from a [`SeedStream`]. A stream is
//! identified by a 64-bit seed; children are derived by mixing in a label, and
//! concrete generators are ChaCha8 instances keyed by the seed and positioned
//! on a per-item stream. Work item `i` therefore draws the same numbers no
//! matter which thread runs it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedStream {
    seed: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        SeedStream { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Child stream for a named sub-task.
    pub fn derive(&self, label: u64) -> SeedStream {
        SeedStream {
            seed: splitmix64(self.seed ^ splitmix64(label.wrapping_add(0x5851_f42d_4c95_7f2d))),
        }
    }

    /// Generator for work item `index`.
    pub fn rng(&self, index: u64) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }
}
