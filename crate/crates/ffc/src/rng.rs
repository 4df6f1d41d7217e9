//! Keyed deterministic random streams.
//!
//! Every source of randomness in a run is a ChaCha stream whose seed is
//! derived from the master seed plus a structural key (purpose tag, client id,
//! round, niche, ...). Streams are never handed out sequentially, so the
//! schedule of results cannot depend on thread interleaving or execution
//! order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags for derived streams. Each distinct consumer of randomness
/// gets its own tag so streams never collide across subsystems.
pub mod tag {
    pub const POP_INIT: u64 = 1;
    pub const NICHE_SIZE: u64 = 2;
    pub const CLUSTER: u64 = 3;
    pub const NICHE_STEP: u64 = 4;
    pub const GLOBAL_STEP: u64 = 5;
    pub const SPLIT: u64 = 6;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a master seed with a structural key into a single stream seed.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    let mut h = splitmix64(master);
    for &p in parts {
        h = splitmix64(h ^ p);
    }
    h
}

/// Deterministic generator for a given seed.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Deterministic generator for a keyed stream under a master seed.
pub fn stream(master: u64, parts: &[u64]) -> ChaCha8Rng {
    seeded(derive_seed(master, parts))
}
