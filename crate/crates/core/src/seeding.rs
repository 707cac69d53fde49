//! Counter-based sub-seeding.
//!
//! Every random stream is keyed by `(master seed, slot, purpose)`, so adding
//! slots to an episode never perturbs the draws of earlier slots.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Topology = 1,
    Channels = 2,
    Tasks = 3,
    Clustering = 4,
    BlockStart = 5,
    Instance = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn sub_seed(master: u64, slot: u64, purpose: Purpose) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ slot) ^ (purpose as u64))
}

pub fn rng_for(master: u64, slot: u64, purpose: Purpose) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(sub_seed(master, slot, purpose))
}
