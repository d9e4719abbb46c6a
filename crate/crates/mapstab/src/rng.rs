//! Deterministic, portable random streams. Every randomized stage derives an
//! independent ChaCha8 stream from `(seed, scene_id, purpose)` through
//! SHA-256, so results never depend on platform hashers, thread timing, or
//! the order scenes happen to be processed in.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Returns the stream for one `(seed, scene, purpose)` triple. The 0x1f
/// separator keeps distinct triples from colliding under concatenation
/// (it never occurs in JSON string content we feed here).
pub fn stream(seed: u64, scene_id: &str, purpose: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update([0x1f]);
    hasher.update(scene_id.as_bytes());
    hasher.update([0x1f]);
    hasher.update(purpose.as_bytes());
    ChaCha8Rng::from_seed(hasher.finalize().into())
}
