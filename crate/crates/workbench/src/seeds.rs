//! Counted seed splitting.
//!
//! Every random stream is `ChaCha8Rng` seeded with `split(master, path)`, where the path
//! names the subtest (ensemble member, configuration index, ...). A single member can be
//! replayed without running the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// One SplitMix64 output for state `x`.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(GOLDEN);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
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

    /// Child stream for counter `i`.
    pub fn child(&self, i: u64) -> SeedStream {
        SeedStream { master: splitmix64(self.master ^ splitmix64(i.wrapping_add(1))) }
    }

    /// Child stream along a path of counters.
    pub fn at(&self, path: &[u64]) -> SeedStream {
        path.iter().fold(*self, |s, &i| s.child(i))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.master)
    }
}
