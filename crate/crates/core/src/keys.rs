//! Canonical key encoding and seed derivation.

use xxhash_rust::xxh3::xxh3_64_with_seed;

/// Encodes an integer key as its 8-byte little-endian representation.
#[inline]
pub fn int_key(value: u64) -> [u8; 8] {
    value.to_le_bytes()
}

/// Decodes a key produced by [`int_key`]. Keys of any other length are not
/// integers.
#[inline]
pub fn key_to_int(key: &[u8]) -> Option<u64> {
    <[u8; 8]>::try_from(key).ok().map(u64::from_le_bytes)
}

pub fn encode_int_keys(values: &[u64]) -> Vec<[u8; 8]> {
    values.iter().map(|&v| int_key(v)).collect()
}

/// Per-component seed: `hash(top_seed, component)`.
pub fn derive_seed(top_seed: u64, component: &str) -> u64 {
    xxh3_64_with_seed(component.as_bytes(), top_seed)
}

/// Seed for the `index`-th independent job of a component (trials, filters).
pub fn derive_indexed_seed(top_seed: u64, component: &str, index: u64) -> u64 {
    let base = derive_seed(top_seed, component);
    xxh3_64_with_seed(&index.to_le_bytes(), base)
}
