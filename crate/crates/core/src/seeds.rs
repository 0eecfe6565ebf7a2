//! Stable seed derivation.
//!
//! A derived seed is the first eight bytes (little endian) of
//! `SHA-256(b"rswc-seed-v1" || len(label) || label || parts...)`, with every
//! integer encoded as 8 little-endian bytes and the label length as one
//! 8-byte word. The layout is fixed so campaign outputs stay reproducible
//! across releases.

use sha2::{Digest, Sha256};

const DOMAIN: &[u8] = b"rswc-seed-v1";

pub fn derive_seed(label: &str, parts: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(DOMAIN);
    h.update((label.len() as u64).to_le_bytes());
    h.update(label.as_bytes());
    for p in parts {
        h.update(p.to_le_bytes());
    }
    let digest = h.finalize();
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(first)
}

/// Seed for one trial of a campaign.
pub fn trial_seed(master_seed: u64, scheme: &str, n: usize, trial_index: u64) -> u64 {
    derive_seed(scheme, &[master_seed, n as u64, trial_index])
}

/// Sub-seed for a named random object inside a trial.
pub fn sub_seed(trial_seed: u64, what: &str, index: u64) -> u64 {
    derive_seed(what, &[trial_seed, index])
}
