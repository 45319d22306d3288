//! Deterministic seed derivation.

use sha2::{Digest, Sha256};

/// Stable 64-bit seed from a parent seed, a domain tag and a key string.
/// Independent of platform, thread scheduling and call order.
pub fn derive_seed(seed: u64, tag: &str, key: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((tag.len() as u64).to_le_bytes());
    h.update(tag.as_bytes());
    h.update(key.as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}
