//! Counter-mode random streams keyed by a master seed.
//!
//! Every trial of a campaign draws from its own ChaCha8 stream selected by
//! `(master_seed, domain, index)`, so results do not depend on how trials are
//! spread across worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrialRng = ChaCha8Rng;

/// Stream domains keep unrelated consumers of one master seed apart.
pub mod domain {
    pub const TRIAL: u64 = 1;
    pub const KEY: u64 = 2;
    pub const KEYSPACE: u64 = 3;
    pub const BLOCKSTATS: u64 = 4;
    pub const GJS: u64 = 5;
}

pub fn derive_rng(master_seed: u64, domain: u64, index: u64) -> TrialRng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&domain.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(seed);
    rng.set_stream(index);
    rng
}
