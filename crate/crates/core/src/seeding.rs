//! Stable seed derivation.
//!
//! Every random stream is keyed by content (master seed, frame id, stage,
//! slot) rather than by execution order, so results do not depend on how
//! frames or objects are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

fn digest64(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().unwrap())
}

/// Per-frame seed from the run's master seed and the frame id.
pub fn hash64(master_seed: u64, frame_id: &str) -> u64 {
    digest64(&[&master_seed.to_le_bytes(), frame_id.as_bytes()])
}

/// Seed of an independent sub-stream of a frame, e.g. `("construct", slot)`.
pub fn sub_seed(frame_seed: u64, stage: &str, slot: u64) -> u64 {
    digest64(&[&frame_seed.to_le_bytes(), stage.as_bytes(), &slot.to_le_bytes()])
}

pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn sub_rng(frame_seed: u64, stage: &str, slot: u64) -> Rng {
    rng_from_seed(sub_seed(frame_seed, stage, slot))
}
