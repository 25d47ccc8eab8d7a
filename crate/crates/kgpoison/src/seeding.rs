//! Deterministic per-question randomness.
//!
//! Every stochastic stage derives its own stream from
//! `(global seed, question id, purpose)`, so parallel scheduling, question
//! order, and unrelated stages can never perturb each other's draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derive an independent RNG stream for one (question, purpose) pair.
pub fn derive_rng(global_seed: u64, question_id: &str, domain: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(global_seed.to_le_bytes());
    hasher.update([0u8]);
    hasher.update(question_id.as_bytes());
    hasher.update([0u8]);
    hasher.update(domain.as_bytes());
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(seed)
}
