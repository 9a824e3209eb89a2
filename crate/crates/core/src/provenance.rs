//! Content hashes that tie every output file to the configuration that
//! produced it.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// First 16 hex digits of the SHA-256 of the value's JSON encoding.
pub fn content_hash<T: Serialize + ?Sized>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("configuration types serialize infallibly");
    let digest = Sha256::digest(&json);
    hex::encode(&digest[..8])
}
