//! Labelled random substreams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream keyed by a
//! `(seed, label)` pair, so results never depend on evaluation order or on
//! how work is split across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(basis: u64, bytes: &[u8]) -> u64 {
    bytes.iter().fold(basis, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Independent generator for `(seed, label)`.
pub fn substream(seed: u64, label: &str) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&fnv1a(FNV_OFFSET, label.as_bytes()).to_le_bytes());
    // second hash with a different basis makes label collisions vanishingly rare
    key[16..24].copy_from_slice(&fnv1a(!FNV_OFFSET, label.as_bytes()).to_le_bytes());
    key[24..32].copy_from_slice(&(label.len() as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Child seed for `(seed, label)`; stable across platforms and releases of this crate.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    substream(seed, label).next_u64()
}
