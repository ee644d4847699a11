//! Short content digests used for corpus ids and atlas versions.

use alloc::string::String;
use core::fmt::Write;
use sha2::{Digest, Sha256};

/// Incremental digest over length-prefixed fields, so `("ab","c")` and
/// `("a","bc")` hash differently.
#[derive(Default)]
pub struct ContentDigest {
    hasher: Sha256,
}

impl ContentDigest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn field(&mut self, value: &str) -> &mut Self {
        self.hasher.update((value.len() as u64).to_le_bytes());
        self.hasher.update(value.as_bytes());
        self
    }

    pub fn bytes(&mut self, value: &[u8]) -> &mut Self {
        self.hasher.update((value.len() as u64).to_le_bytes());
        self.hasher.update(value);
        self
    }

    /// `prefix` followed by the first 12 bytes of the hash in hex.
    pub fn finish(self, prefix: &str) -> String {
        let hash = self.hasher.finalize();
        let mut out = String::with_capacity(prefix.len() + 24);
        out.push_str(prefix);
        for byte in &hash[..12] {
            let _ = write!(out, "{byte:02x}");
        }
        out
    }
}
