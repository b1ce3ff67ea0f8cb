//! Deterministic seed-derived random streams.
//!
//! Every replica gets its own stream keyed by `(master_seed, replica_index)`,
//! so replica fan-out across threads reproduces the single-threaded run
//! exactly, independent of scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG used throughout the crate.
pub type Rng = ChaCha8Rng;

/// Derive the stream for one replica of a Monte Carlo run.
pub fn replica_stream(master_seed: u64, replica: u64) -> Rng {
    let mut seed = [0u8; 32];
    seed[..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&replica.to_le_bytes());
    // Distinct fixed tail so (seed, 0) differs from seed_from_u64(seed).
    seed[16..24].copy_from_slice(&0x9e37_79b9_7f4a_7c15u64.to_le_bytes());
    Rng::from_seed(seed)
}

/// Derive a stream for a named sub-experiment (non-replicated draws).
pub fn named_stream(master_seed: u64, label: &str) -> Rng {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    replica_stream(master_seed, h)
}
