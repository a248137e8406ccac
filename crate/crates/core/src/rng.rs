//! Reproducible random streams keyed by `(seed, phase label)`.
//!
//! Every randomized step draws from its own stream so that changing how many
//! numbers one phase consumes never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Stream = ChaCha8Rng;

pub const PHASE_PILOT: &str = "variance-pilot";
pub const PHASE_RETRIEVAL: &str = "retrieval";
pub const PHASE_VALIDATION_SPLIT: &str = "validation-split";
pub const PHASE_TEST: &str = "simulation-test";
pub const PHASE_LABELS: &str = "labels";
pub const PHASE_PRETRAINED: &str = "pretrained";
pub const PHASE_SYNTHETIC: &str = "density-ratio-synthetic";

/// Deterministic stream for `(seed, phase_label)`.
pub fn rng_stream(seed: u64, phase_label: &str) -> Stream {
    Stream::from_seed(derive_key(seed, phase_label, None))
}

/// Stream for one repetition (or worker) within a phase.
pub fn rng_substream(seed: u64, phase_label: &str, index: u64) -> Stream {
    Stream::from_seed(derive_key(seed, phase_label, Some(index)))
}

fn derive_key(seed: u64, label: &str, index: Option<u64>) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(b"fsp-stream-v1");
    hasher.update(seed.to_le_bytes());
    hasher.update((label.len() as u64).to_le_bytes());
    hasher.update(label.as_bytes());
    if let Some(i) = index {
        hasher.update(i.to_le_bytes());
    }
    hasher.finalize().into()
}

/// SHA-256 of a seed, a label and a word sequence; backs the white-noise model.
pub fn hash_words(seed: u64, label: &str, words: &[u64]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(b"fsp-hash-v1");
    hasher.update(seed.to_le_bytes());
    hasher.update(label.as_bytes());
    for w in words {
        hasher.update(w.to_le_bytes());
    }
    hasher.finalize().into()
}
