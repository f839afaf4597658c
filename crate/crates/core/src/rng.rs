//! Seed handling.
//!
//! Every random draw in the crate comes from a ChaCha stream keyed by a 64-bit
//! seed. [`SeedTree`] derives independent child seeds so that parallel or
//! reordered work stays reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-based seed splitter: `child(i)` is a pure function of the root seed and `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    seed: u64,
}

impl SeedTree {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn child(&self, index: u64) -> SeedTree {
        SeedTree { seed: splitmix64(self.seed ^ splitmix64(index.wrapping_add(1))) }
    }

    /// Derives a child from a string tag.
    pub fn named(&self, tag: &str) -> SeedTree {
        let h = tag.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
        self.child(h)
    }

    pub fn rng(&self) -> Rng {
        rng_from_seed(self.seed)
    }
}
