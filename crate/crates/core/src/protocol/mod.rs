//! The five-phase user-based authentication scheme.
//!
//! Phases run in order: the server initializes its master key, sensors are
//! registered over a secure channel, each sensor authenticates through its
//! access point with a timestamped, MAC-bound request and an ephemeral ECDH
//! share, the gateway screens traffic (see [`crate::dos_filter`]), and the
//! resulting session key seals every record the sensor submits.

mod messages;
mod sensor;
mod server;

use thiserror::Error;

use crate::crypto::{CryptoError, EncryptedRecord, RecordCipher, SessionKey};

pub use messages::{AuthRequest, AuthResponse, AuthStatus, Digest, ForwardedRequest, RejectReason};
pub use sensor::{ap_forward, begin_auth, sensor_confirm};
pub use server::{
    recover_nonce, register_access_point, register_sensor, server_init, server_verify, MasterKey, RegistryEntry,
    ServerDb, DEFAULT_FRESHNESS_WINDOW,
};

pub const ID_LEN: usize = 16;
pub const SALT_LEN: usize = 16;

/// 16-byte node identity (sensor, access point or gateway).
pub type Id = [u8; ID_LEN];

/// Milliseconds of simulated time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Millis(pub u64);

impl Millis {
    pub fn abs_diff(self, other: Millis) -> u64 {
        self.0.abs_diff(other.0)
    }

    pub fn to_be_bytes(self) -> [u8; 8] {
        self.0.to_be_bytes()
    }
}

/// Source of the current simulated time.
pub trait Clock {
    fn now(&self) -> Millis;
}

/// A fixed instant is itself a clock.
impl Clock for Millis {
    fn now(&self) -> Millis {
        *self
    }
}

/// The scheme's phases in execution order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Initialization,
    Registration,
    Authentication,
    DosMitigation,
    EncryptionDecryption,
}

impl Phase {
    pub const ALL: [Phase; 5] = [
        Phase::Initialization,
        Phase::Registration,
        Phase::Authentication,
        Phase::DosMitigation,
        Phase::EncryptionDecryption,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Phase::Initialization => "initialization",
            Phase::Registration => "registration",
            Phase::Authentication => "authentication",
            Phase::DosMitigation => "dos-mitigation",
            Phase::EncryptionDecryption => "encryption/decryption",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("sensor already registered")]
    DuplicateSensor,
    #[error("access point is not registered")]
    UnknownAccessPoint,
    #[error("server proof N2* did not verify")]
    ServerAuthFailure,
    #[error("server rejected the request: {0}")]
    Rejected(RejectReason),
    #[error("malformed message: {0}")]
    Malformed(&'static str),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

/// What a sensor holds after registration. `b_sn` never leaves the sensor
/// and the server.
#[derive(Clone, PartialEq, Eq)]
pub struct SensorCredential {
    pub id_sn: Id,
    pub a_sn: Digest,
    pub b_sn: Digest,
    pub ap_id: Id,
}

impl std::fmt::Debug for SensorCredential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SensorCredential")
            .field("id_sn", &crate::crypto::to_hex(&self.id_sn))
            .field("a_sn", &crate::crypto::to_hex(&self.a_sn))
            .field("ap_id", &crate::crypto::to_hex(&self.ap_id))
            .finish_non_exhaustive()
    }
}

/// Established session, held by both the sensor and the server.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SessionContext {
    pub session_key: SessionKey,
    pub sensor_id: Id,
    pub established_at: Millis,
    pub nonce_counter: u64,
}

impl SessionContext {
    /// nonce = H(session_key ‖ counter)[..16]; the counter then advances.
    pub fn next_nonce(&mut self) -> [u8; 16] {
        let digest = crate::crypto::hash(&[&self.session_key.key, &self.nonce_counter.to_be_bytes()]);
        self.nonce_counter += 1;
        let mut nonce = [0u8; 16];
        nonce.copy_from_slice(&digest[..16]);
        nonce
    }
}

pub fn submit_record(ctx: &mut SessionContext, plaintext: &[u8]) -> EncryptedRecord {
    submit_record_with(ctx, &RecordCipher::default(), plaintext)
}

pub fn submit_record_with(ctx: &mut SessionContext, cipher: &RecordCipher, plaintext: &[u8]) -> EncryptedRecord {
    let nonce = ctx.next_nonce();
    cipher.seal(&ctx.session_key, &nonce, plaintext)
}

pub fn read_record(ctx: &SessionContext, record: &EncryptedRecord) -> Result<Vec<u8>, CryptoError> {
    read_record_with(ctx, &RecordCipher::default(), record)
}

pub fn read_record_with(
    ctx: &SessionContext,
    cipher: &RecordCipher,
    record: &EncryptedRecord,
) -> Result<Vec<u8>, CryptoError> {
    cipher.open(&ctx.session_key, record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::kdf;

    fn ctx(tag: &[u8]) -> SessionContext {
        SessionContext {
            session_key: kdf(b"session", tag).unwrap(),
            sensor_id: [1; 16],
            established_at: Millis(0),
            nonce_counter: 0,
        }
    }

    #[test]
    fn record_roundtrip_and_nonces_advance() {
        let mut c = ctx(b"a");
        let r1 = submit_record(&mut c, b"spo2=98");
        let r2 = submit_record(&mut c, b"spo2=98");
        assert_ne!(r1.nonce, r2.nonce);
        assert_eq!(c.nonce_counter, 2);
        assert_eq!(read_record(&c, &r1).unwrap(), b"spo2=98");
        assert_eq!(read_record(&c, &r2).unwrap(), b"spo2=98");
    }

    #[test]
    fn foreign_session_rejected() {
        let mut a = ctx(b"a");
        let b = ctx(b"b");
        let rec = submit_record(&mut a, b"x");
        assert_eq!(read_record(&b, &rec), Err(CryptoError::KeyIdMismatch));
    }

    #[test]
    fn truncated_record_fails_integrity() {
        let mut a = ctx(b"a");
        let mut rec = submit_record(&mut a, b"temperature=37.1");
        rec.ciphertext.truncate(5);
        assert_eq!(read_record(&a, &rec), Err(CryptoError::IntegrityFailure));
    }

    #[test]
    fn phases_are_ordered() {
        assert_eq!(Phase::ALL.len(), 5);
        assert!(Phase::ALL.windows(2).all(|w| w[0] < w[1]));
    }
}
