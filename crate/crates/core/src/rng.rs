//! Reproducible random streams.
//!
//! Every component draws from its own stream, derived by hashing the
//! master seed together with a component label and a trial index. Two
//! streams with different labels or indices are statistically independent,
//! and the same triple always yields the same stream on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// The random stream type used throughout the crate.
pub type Stream = ChaCha8Rng;

/// Derives the stream for `(master_seed, label, index)`.
pub fn stream(master_seed: u64, label: &str, index: u64) -> Stream {
    let mut hasher = Sha256::new();
    hasher.update(b"memogan.stream.v1");
    hasher.update(master_seed.to_le_bytes());
    hasher.update((label.len() as u64).to_le_bytes());
    hasher.update(label.as_bytes());
    hasher.update(index.to_le_bytes());
    let digest: [u8; 32] = hasher.finalize().into();
    ChaCha8Rng::from_seed(digest)
}
