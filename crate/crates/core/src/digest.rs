//! Canonical JSON and stable 64-bit fingerprints.
//!
//! Canonical form: object keys sorted, no whitespace, floats in shortest
//! round-trip notation. The fingerprint is the first 8 bytes (big endian) of
//! SHA-256 over the canonical text.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;

/// Serializes through `serde_json::Value`, whose maps are key-ordered.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    Ok(serde_json::to_string(&serde_json::to_value(value)?)?)
}

pub fn hash64_bytes(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    u64::from_be_bytes(digest[..8].try_into().expect("sha256 has 32 bytes"))
}

pub fn fingerprint<T: Serialize + ?Sized>(value: &T) -> Result<u64> {
    Ok(hash64_bytes(canonical_json(value)?.as_bytes()))
}

/// Fingerprint as 16 lowercase hex digits.
pub fn fingerprint_hex<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    Ok(format!("{:016x}", fingerprint(value)?))
}
