//! SHA-256 helpers, the session-key derivation and per-thread operation
//! counters used to audit how much work a code path performs.

use std::cell::Cell;

use sha2::{Digest, Sha256};

use super::CryptoError;

pub const HASH_LEN: usize = 32;
pub const KEY_ID_LEN: usize = 16;

thread_local! {
    static HASH_OPS: Cell<u64> = const { Cell::new(0) };
    static CURVE_OPS: Cell<u64> = const { Cell::new(0) };
}

/// Snapshot of the calling thread's hash and curve operation counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCounts {
    pub hashes: u64,
    pub curve_ops: u64,
}

impl OpCounts {
    pub fn current() -> Self {
        OpCounts { hashes: HASH_OPS.with(Cell::get), curve_ops: CURVE_OPS.with(Cell::get) }
    }

    /// Operations performed since `earlier` was taken.
    pub fn since(earlier: OpCounts) -> Self {
        let now = Self::current();
        OpCounts { hashes: now.hashes - earlier.hashes, curve_ops: now.curve_ops - earlier.curve_ops }
    }
}

pub(crate) fn count_curve_op() {
    CURVE_OPS.with(|c| c.set(c.get() + 1));
}

/// SHA-256 over the concatenation of `parts`.
pub fn hash(parts: &[&[u8]]) -> [u8; HASH_LEN] {
    HASH_OPS.with(|c| c.set(c.get() + 1));
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    h.finalize().into()
}

/// Symmetric session key plus the identifier carried in every record sealed
/// under it.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SessionKey {
    pub key: [u8; HASH_LEN],
    pub key_id: [u8; KEY_ID_LEN],
}

impl std::fmt::Debug for SessionKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SessionKey").field("key_id", &super::to_hex(&self.key_id)).finish_non_exhaustive()
    }
}

/// key = H(secret ‖ context); key_id = H(key)[..16].
pub fn kdf(secret: &[u8], context: &[u8]) -> Result<SessionKey, CryptoError> {
    if secret.is_empty() {
        return Err(CryptoError::EmptySecret);
    }
    let key = hash(&[secret, context]);
    let outer = hash(&[&key]);
    let mut key_id = [0u8; KEY_ID_LEN];
    key_id.copy_from_slice(&outer[..KEY_ID_LEN]);
    Ok(SessionKey { key, key_id })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_reference_vectors() {
        assert_eq!(hex::encode(hash(&[b"abc"])), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_eq!(hex::encode(hash(&[])), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
        // split input hashes the same as contiguous input
        assert_eq!(hash(&[b"a", b"bc"]), hash(&[b"abc"]));
    }

    #[test]
    fn kdf_is_deterministic_and_sized() {
        let a = kdf(b"secret", b"ctx").unwrap();
        let b = kdf(b"secret", b"ctx").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.key.len(), 32);
        assert_eq!(a.key_id[..], hash(&[&a.key])[..16]);
    }

    #[test]
    fn kdf_separates_contexts() {
        let a = kdf(b"s", b"A").unwrap();
        let b = kdf(b"s", b"B").unwrap();
        // hashlib.sha256(b"sA"), hashlib.sha256(b"sB")
        assert_eq!(hex::encode(a.key), "5b53b6c789e6c0cddd464a8ae1b55cb04d0ad8f643d3fe7e0eefe76e00fbd69b");
        assert_eq!(hex::encode(b.key), "035094671d34184acd16fd95f6966037e33b284fbb920055e49ac38f7c4b1358");
        assert_ne!(a.key, b.key);
        assert_ne!(a.key_id, b.key_id);
        let differing_bits: u32 = a.key.iter().zip(&b.key).map(|(x, y)| (x ^ y).count_ones()).sum();
        assert!(differing_bits > 64, "only {differing_bits} bits differ");
    }

    #[test]
    fn kdf_rejects_empty_secret() {
        assert!(matches!(kdf(b"", b"ctx"), Err(CryptoError::EmptySecret)));
    }

    #[test]
    fn counters_track_hashes() {
        let before = OpCounts::current();
        hash(&[b"x"]);
        kdf(b"k", b"c").unwrap();
        assert_eq!(OpCounts::since(before).hashes, 3);
    }
}
