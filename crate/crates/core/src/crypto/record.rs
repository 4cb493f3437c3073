//! Sealed records: RC4 under a per-record key with a SHA-256 integrity tag.
//!
//! Wire layout: key_id(16) ‖ nonce(16) ‖ len(4, big-endian) ‖ ciphertext ‖ tag(32).

use super::hash::{hash, SessionKey, HASH_LEN, KEY_ID_LEN};
use super::rc4::Rc4State;
use super::CryptoError;

pub const NONCE_LEN: usize = 16;
pub const TAG_LEN: usize = HASH_LEN;
/// Size of an encoded record with an empty ciphertext.
pub const RECORD_OVERHEAD: usize = KEY_ID_LEN + NONCE_LEN + 4 + TAG_LEN;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncryptedRecord {
    pub key_id: [u8; KEY_ID_LEN],
    pub nonce: [u8; NONCE_LEN],
    pub ciphertext: Vec<u8>,
    pub tag: [u8; TAG_LEN],
}

impl EncryptedRecord {
    pub fn encoded_len(&self) -> usize {
        RECORD_OVERHEAD + self.ciphertext.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&self.key_id);
        out.extend_from_slice(&self.nonce);
        out.extend_from_slice(&(self.ciphertext.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.ciphertext);
        out.extend_from_slice(&self.tag);
        out
    }

    /// Decodes exactly one record; trailing bytes are an error.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let (rec, used) = Self::decode_prefix(bytes)?;
        if used != bytes.len() {
            return Err(CryptoError::MalformedRecord("trailing bytes"));
        }
        Ok(rec)
    }

    /// Decodes one record from the front of `bytes`, returning it with the
    /// number of bytes consumed.
    pub fn decode_prefix(bytes: &[u8]) -> Result<(Self, usize), CryptoError> {
        if bytes.len() < RECORD_OVERHEAD {
            return Err(CryptoError::MalformedRecord("truncated header"));
        }
        let mut key_id = [0u8; KEY_ID_LEN];
        key_id.copy_from_slice(&bytes[..16]);
        let mut nonce = [0u8; NONCE_LEN];
        nonce.copy_from_slice(&bytes[16..32]);
        let len = u32::from_be_bytes(bytes[32..36].try_into().unwrap()) as usize;
        let total = RECORD_OVERHEAD.checked_add(len).ok_or(CryptoError::MalformedRecord("length overflow"))?;
        if bytes.len() < total {
            return Err(CryptoError::MalformedRecord("truncated body"));
        }
        let ciphertext = bytes[36..36 + len].to_vec();
        let mut tag = [0u8; TAG_LEN];
        tag.copy_from_slice(&bytes[36 + len..total]);
        Ok((EncryptedRecord { key_id, nonce, ciphertext, tag }, total))
    }
}

/// Record sealing configuration. The default keeps the raw RC4 keystream;
/// `rc4_drop` discards that many leading bytes of every per-record stream.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RecordCipher {
    pub rc4_drop: usize,
}

impl RecordCipher {
    pub fn new(rc4_drop: usize) -> Self {
        RecordCipher { rc4_drop }
    }

    pub fn seal(&self, key: &SessionKey, nonce: &[u8; NONCE_LEN], plaintext: &[u8]) -> EncryptedRecord {
        let mut ciphertext = plaintext.to_vec();
        self.stream(key, nonce).apply_in_place(&mut ciphertext);
        let tag = hash(&[&key.key, nonce, &ciphertext]);
        EncryptedRecord { key_id: key.key_id, nonce: *nonce, ciphertext, tag }
    }

    /// Checks the key id, then the tag, and only then decrypts.
    pub fn open(&self, key: &SessionKey, record: &EncryptedRecord) -> Result<Vec<u8>, CryptoError> {
        if record.key_id != key.key_id {
            return Err(CryptoError::KeyIdMismatch);
        }
        let expect = hash(&[&key.key, &record.nonce, &record.ciphertext]);
        if expect != record.tag {
            return Err(CryptoError::IntegrityFailure);
        }
        let mut plaintext = record.ciphertext.clone();
        self.stream(key, &record.nonce).apply_in_place(&mut plaintext);
        Ok(plaintext)
    }

    fn stream(&self, key: &SessionKey, nonce: &[u8; NONCE_LEN]) -> Rc4State {
        let record_key = hash(&[&key.key, nonce]);
        Rc4State::with_drop(&record_key, self.rc4_drop).expect("32-byte key")
    }
}

pub fn seal_record(key: &SessionKey, nonce: &[u8; NONCE_LEN], plaintext: &[u8]) -> EncryptedRecord {
    RecordCipher::default().seal(key, nonce, plaintext)
}

pub fn open_record(key: &SessionKey, record: &EncryptedRecord) -> Result<Vec<u8>, CryptoError> {
    RecordCipher::default().open(key, record)
}
