//! Deterministic random streams.
//!
//! Every random decision in the pipeline draws from a [`ChaCha12Rng`] obtained
//! by hashing the run seed together with a stable string label. Separately
//! labeled streams are statistically independent, so stages (and experiment
//! arms) can be reordered or run concurrently without perturbing each other's
//! draws — a requirement for byte-identical reruns.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

/// Derive the RNG for a named substream of `seed`.
///
/// The stream key is `SHA-256(seed_le_bytes || label)`, so any change to
/// either input yields an unrelated stream.
pub fn substream(seed: u64, label: &str) -> ChaCha12Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest: [u8; 32] = hasher.finalize().into();
    ChaCha12Rng::from_seed(digest)
}
