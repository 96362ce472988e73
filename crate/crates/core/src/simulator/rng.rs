//! Deterministic per-circuit random streams: every (circuit id, trajectory)
//! pair gets its own counter-seeded generator so trajectory batches can be
//! reordered or parallelized without changing results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// FNV-1a over the id bytes; stable across platforms and runs.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Independent stream for one trajectory of one circuit under a global seed.
pub fn stream_rng(seed: u64, circuit_id: &str, trajectory: u64) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&fnv1a64(circuit_id.as_bytes()).to_le_bytes());
    key[16..24].copy_from_slice(&trajectory.to_le_bytes());
    key[24..32].copy_from_slice(&0x70616972u64.to_le_bytes());
    ChaCha12Rng::from_seed(key)
}
