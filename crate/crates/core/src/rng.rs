//! Seeded random streams.
//!
//! Every stochastic entry point takes a [`SimRng`]. Parallel trials never share
//! a generator: trial `i` of a run with master seed `s` draws from
//! `stream(s, i)`, so results do not depend on how trials are scheduled.

use rand::SeedableRng;
use rand_pcg::Pcg32;

/// PCG generator with 64 bits of state plus a 64-bit stream selector.
pub type SimRng = Pcg32;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of stream `index` under `master`.
pub fn split_seed(master: u64, index: u64) -> u64 {
    mix64(master ^ mix64(index.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

pub fn from_seed(seed: u64) -> SimRng {
    Pcg32::new(mix64(seed), mix64(seed ^ 0xda3e_39cb_94b9_5bdb) | 1)
}

/// Generator for trial `index` of a run seeded with `master`.
pub fn stream(master: u64, index: u64) -> SimRng {
    from_seed(split_seed(master, index))
}

/// Fresh generator seeded from another one, for nested protocol stages.
pub fn fork(rng: &mut SimRng) -> SimRng {
    use rand::RngCore;
    let seed = rng.next_u64();
    SimRng::seed_from_u64(seed)
}
