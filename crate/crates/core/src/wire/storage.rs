//! Storage cost of a sparse vector: dense field mask versus key-value pairs.

use crate::codecs::FLOAT_BITS;

/// Key width used by key-value frames on the wire.
pub const KEY_BITS: u64 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StorageScheme {
    /// `w` mask bits per element plus every retained value.
    Mask,
    /// One `(key, value)` pair per retained value.
    KeyValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StorageCost {
    pub scheme: StorageScheme,
    pub bits: u64,
    pub d: u64,
    pub k: u64,
    pub value_bits: u64,
    pub key_bits: u64,
}

/// Bits needed to store `k` of `d` values under `scheme`, with mask field
/// width `w` and key width `key_bits`.
///
/// Mask: `w·d + 32·k`. Key-value: `(32 + key_bits)·k`.
pub fn storage_cost(scheme: StorageScheme, d: u64, k: u64, w: u64, key_bits: u64) -> StorageCost {
    debug_assert!(k <= d, "k = {k} exceeds d = {d}");
    let bits = match scheme {
        StorageScheme::Mask => w * d + FLOAT_BITS * k,
        StorageScheme::KeyValue => (FLOAT_BITS + key_bits) * k,
    };
    StorageCost {
        scheme,
        bits,
        d,
        k,
        value_bits: FLOAT_BITS,
        key_bits,
    }
}

/// Sparsity `1 − k/d` above which key-value storage beats a 1-bit mask:
/// `1 − 1/key_bits`.
pub fn crossover_sparsity(key_bits: u64) -> f64 {
    assert!(key_bits >= 1, "key width must be positive");
    1.0 - 1.0 / key_bits as f64
}

/// True when key-value pairs with 32-bit keys are strictly cheaper than a
/// 1-bit mask for `k` of `d` values.
pub fn prefer_key_value(d: usize, k: usize) -> bool {
    let kv = storage_cost(StorageScheme::KeyValue, d as u64, k as u64, 1, KEY_BITS);
    let mask = storage_cost(StorageScheme::Mask, d as u64, k as u64, 1, KEY_BITS);
    kv.bits < mask.bits
}
