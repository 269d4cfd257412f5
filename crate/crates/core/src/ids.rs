//! Stable content hashes and keyed uniform draws.
//!
//! Everything here is a pure function of its inputs and must stay stable
//! across releases: persisted block ids and subsample membership depend on it.

use xxhash_rust::xxh3::{xxh3_64, xxh3_64_with_seed};

use crate::TokenId;

/// Content hash of a token sequence.
pub fn doc_id(tokens: &[TokenId]) -> u64 {
    xxh3_64(&token_bytes(tokens))
}

/// Hash of `(doc_id, block index)`.
pub fn block_id(doc_id: u64, index: u64) -> u64 {
    let mut buf = [0u8; 16];
    buf[..8].copy_from_slice(&doc_id.to_le_bytes());
    buf[8..].copy_from_slice(&index.to_le_bytes());
    xxh3_64(&buf)
}

/// Seeded 64-bit hash of a token sequence.
pub fn seeded_token_hash(tokens: &[TokenId], seed: u64) -> u64 {
    xxh3_64_with_seed(&token_bytes(tokens), seed)
}

/// Counter-style draw in `[0, 1)` keyed on `(seed, key)`.
pub fn unit_draw(seed: u64, key: u64) -> f64 {
    let h = xxh3_64_with_seed(&key.to_le_bytes(), seed);
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Seeded mixing of a key, used for deterministic shuffles.
pub fn keyed_order(seed: u64, key: u64) -> u64 {
    xxh3_64_with_seed(&key.to_le_bytes(), seed ^ 0x9e37_79b9_7f4a_7c15)
}

fn token_bytes(tokens: &[TokenId]) -> Vec<u8> {
    let mut out = Vec::with_capacity(tokens.len() * 4);
    for t in tokens {
        out.extend_from_slice(&t.to_le_bytes());
    }
    out
}
