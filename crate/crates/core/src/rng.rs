//! Seed derivation for independent random substreams.
//!
//! Every stochastic step in a run draws from a ChaCha stream whose seed is a
//! pure function of the master seed and a path of integer tags (scenario
//! index, activity draw, ...). Results therefore do not depend on how work is
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a seed from `master` and a tag path.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(master), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn substream(master: u64, tags: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, tags))
}

/// Stable 64-bit FNV-1a hash, used to turn names into stream tags.
pub fn name_tag(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

// Stream domain tags.
pub(crate) const TAG_SCENARIO: u64 = 1;
pub(crate) const TAG_ACTIVITY: u64 = 2;
pub(crate) const TAG_CHANNEL: u64 = 3;
pub(crate) const TAG_ASSIGNMENT: u64 = 4;
