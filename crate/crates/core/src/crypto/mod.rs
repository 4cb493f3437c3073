//! Curve arithmetic, ECDH, RC4, key derivation and the sealed record format.

mod curve;
mod field;
mod hash;
mod rc4;
mod record;

use thiserror::Error;

pub use curve::{
    ecdh_shared, keypair_gen, point_add, point_neg, scalar_mul, CurveId, CurveParams, CurvePoint, KeyPair, Scalar,
    SharedSecret,
};
pub use field::{Modulus, U256};
pub use hash::{hash, kdf, OpCounts, SessionKey, HASH_LEN, KEY_ID_LEN};
pub use rc4::{rc4_apply, rc4_ksa, Rc4State, RC4_DROP_HARDENED};
pub use record::{open_record, seal_record, EncryptedRecord, RecordCipher, NONCE_LEN, RECORD_OVERHEAD, TAG_LEN};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("point is not on the curve")]
    PointNotOnCurve,
    #[error("key agreement produced the point at infinity")]
    IdentityPoint,
    #[error("private scalar must be nonzero")]
    ZeroScalar,
    #[error("invalid curve parameters: {0}")]
    InvalidCurve(&'static str),
    #[error("malformed point encoding")]
    MalformedPoint,
    #[error("key derivation secret is empty")]
    EmptySecret,
    #[error("RC4 key length {0} outside 1..=256")]
    BadKeyLength(usize),
    #[error("record integrity check failed")]
    IntegrityFailure,
    #[error("record was sealed under a different key")]
    KeyIdMismatch,
    #[error("malformed record: {0}")]
    MalformedRecord(&'static str),
}

pub(crate) fn to_hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
