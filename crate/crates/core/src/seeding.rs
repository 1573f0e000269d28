//! Deterministic derivation of independent random streams.
//!
//! Every stochastic step takes its own stream, derived from a master seed, an
//! instance index and a role tag by hashing the triple with SHA-256. Equal
//! triples give equal streams; changing any component gives an unrelated one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// The generator used throughout the crate.
pub type Stream = ChaCha8Rng;

fn digest(master: u64, index: u64, tag: &str) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(b"sparsespike/v1");
    hasher.update(master.to_le_bytes());
    hasher.update(index.to_le_bytes());
    hasher.update((tag.len() as u64).to_le_bytes());
    hasher.update(tag.as_bytes());
    let out = hasher.finalize();
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&out);
    bytes
}

/// 64-bit seed for `(master, index, tag)`.
pub fn derive_seed(master: u64, index: u64, tag: &str) -> u64 {
    let d = digest(master, index, tag);
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// A fresh stream keyed by the full 256-bit digest of `(master, index, tag)`.
pub fn stream(master: u64, index: u64, tag: &str) -> Stream {
    ChaCha8Rng::from_seed(digest(master, index, tag))
}

/// A stream from a single 64-bit seed, e.g. one printed in an output header.
pub fn stream_from_seed(seed: u64) -> Stream {
    stream(seed, 0, "root")
}
