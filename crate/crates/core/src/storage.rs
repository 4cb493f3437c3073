//! In-memory cloud store for sealed records, with an optional append-only
//! snapshot file.
//!
//! Snapshot entries are sensor_id(16) ‖ stored_at(8) ‖ seq(8) ‖ record wire
//! form, all big-endian.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::crypto::{CryptoError, EncryptedRecord};
use crate::protocol::{Id, Millis, ID_LEN};

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("invalid range: {from:?} > {to:?}")]
    InvalidRange { from: Millis, to: Millis },
    #[error("snapshot I/O: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt snapshot: {0}")]
    Corrupt(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoredRecord {
    pub record: EncryptedRecord,
    pub sensor_id: Id,
    pub stored_at: Millis,
    pub seq: u64,
}

impl StoredRecord {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(ID_LEN + 16 + self.record.encoded_len());
        out.extend_from_slice(&self.sensor_id);
        out.extend_from_slice(&self.stored_at.0.to_be_bytes());
        out.extend_from_slice(&self.seq.to_be_bytes());
        out.extend_from_slice(&self.record.to_bytes());
        out
    }

    fn decode_prefix(bytes: &[u8]) -> Result<(Self, usize), CryptoError> {
        if bytes.len() < ID_LEN + 16 {
            return Err(CryptoError::MalformedRecord("truncated snapshot entry"));
        }
        let sensor_id: Id = bytes[..ID_LEN].try_into().unwrap();
        let stored_at = Millis(u64::from_be_bytes(bytes[16..24].try_into().unwrap()));
        let seq = u64::from_be_bytes(bytes[24..32].try_into().unwrap());
        let (record, used) = EncryptedRecord::decode_prefix(&bytes[32..])?;
        Ok((StoredRecord { record, sensor_id, stored_at, seq }, 32 + used))
    }
}

/// Append-only record store. Nothing here ever rewrites or removes an
/// entry, and it only ever sees ciphertext.
#[derive(Debug, Default)]
pub struct CloudStore {
    by_sensor: BTreeMap<Id, Vec<StoredRecord>>,
    snapshot: Option<BufWriter<File>>,
}

impl CloudStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Also appends every put to `path`, creating it if needed.
    pub fn with_snapshot(path: &Path) -> Result<Self, StorageError> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(CloudStore { by_sensor: BTreeMap::new(), snapshot: Some(BufWriter::new(file)) })
    }

    /// Rebuilds a store from a snapshot file.
    pub fn load_snapshot(path: &Path) -> Result<Self, StorageError> {
        let mut bytes = Vec::new();
        File::open(path)?.read_to_end(&mut bytes)?;
        let mut store = CloudStore::new();
        let mut rest = &bytes[..];
        while !rest.is_empty() {
            let (entry, used) = StoredRecord::decode_prefix(rest).map_err(|e| StorageError::Corrupt(e.to_string()))?;
            let list = store.by_sensor.entry(entry.sensor_id).or_default();
            if entry.seq != list.len() as u64 {
                return Err(StorageError::Corrupt(format!("sequence gap at seq {}", entry.seq)));
            }
            list.push(entry);
            rest = &rest[used..];
        }
        Ok(store)
    }

    /// Appends and returns the per-sensor sequence number.
    pub fn put(&mut self, sensor_id: Id, record: EncryptedRecord, now: Millis) -> Result<u64, StorageError> {
        let list = self.by_sensor.entry(sensor_id).or_default();
        let seq = list.len() as u64;
        let stored = StoredRecord { record, sensor_id, stored_at: now, seq };
        if let Some(w) = self.snapshot.as_mut() {
            w.write_all(&stored.to_bytes())?;
        }
        list.push(stored);
        Ok(seq)
    }

    pub fn get(&self, sensor_id: &Id, seq: u64) -> Option<&StoredRecord> {
        self.by_sensor.get(sensor_id)?.get(seq as usize)
    }

    /// Records with `stored_at` in [from, to], in sequence order.
    pub fn get_range(&self, sensor_id: &Id, from: Millis, to: Millis) -> Result<Vec<StoredRecord>, StorageError> {
        if from > to {
            return Err(StorageError::InvalidRange { from, to });
        }
        Ok(self
            .by_sensor
            .get(sensor_id)
            .map(|list| list.iter().filter(|r| r.stored_at >= from && r.stored_at <= to).cloned().collect())
            .unwrap_or_default())
    }

    pub fn len(&self) -> usize {
        self.by_sensor.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &StoredRecord> {
        self.by_sensor.values().flatten()
    }

    pub fn flush(&mut self) -> Result<(), StorageError> {
        if let Some(w) = self.snapshot.as_mut() {
            w.flush()?;
        }
        Ok(())
    }
}

impl Drop for CloudStore {
    fn drop(&mut self) {
        let _ = self.flush();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{kdf, open_record, seal_record};

    fn rec(i: u8) -> EncryptedRecord {
        seal_record(&kdf(b"storage", b"k").unwrap(), &[i; 16], &[i; 8])
    }

    #[test]
    fn sequence_numbers_per_sensor() {
        let mut s = CloudStore::new();
        assert_eq!(s.put([1; 16], rec(0), Millis(5)).unwrap(), 0);
        assert_eq!(s.put([1; 16], rec(1), Millis(6)).unwrap(), 1);
        assert_eq!(s.put([2; 16], rec(2), Millis(6)).unwrap(), 0);
        assert_eq!(s.get(&[1; 16], 1).unwrap().record, rec(1));
        assert_eq!(s.len(), 3);
    }

    #[test]
    fn empty_and_disjoint_ranges() {
        let mut s = CloudStore::new();
        assert!(s.get_range(&[1; 16], Millis(0), Millis(100)).unwrap().is_empty());
        s.put([1; 16], rec(0), Millis(50)).unwrap();
        assert!(s.get_range(&[1; 16], Millis(60), Millis(100)).unwrap().is_empty());
        assert!(matches!(s.get_range(&[1; 16], Millis(9), Millis(8)), Err(StorageError::InvalidRange { .. })));
    }

    #[test]
    fn range_selects_exactly_the_covered_records() {
        let mut s = CloudStore::new();
        let times = [3u64, 10, 11, 25, 30, 31, 40, 55, 60, 75];
        for (i, t) in times.iter().enumerate() {
            s.put([1; 16], rec(i as u8), Millis(*t)).unwrap();
        }
        let got = s.get_range(&[1; 16], Millis(25), Millis(31)).unwrap();
        // enumeration oracle over the inserted timestamps
        let expect: Vec<u64> =
            times.iter().enumerate().filter(|(_, t)| (25..=31).contains(*t)).map(|(i, _)| i as u64).collect();
        assert_eq!(expect, vec![3, 4, 5]);
        assert_eq!(got.iter().map(|r| r.seq).collect::<Vec<_>>(), expect);
    }

    #[test]
    fn forgotten_keys_leave_records_unopenable() {
        let mut s = CloudStore::new();
        for i in 0..5 {
            s.put([1; 16], rec(i), Millis(i as u64)).unwrap();
        }
        let other = kdf(b"some other session", b"k").unwrap();
        assert!(s.iter().all(|r| open_record(&other, &r.record).is_err()));
        assert!(s.iter().all(|r| r.record.ciphertext != [r.seq as u8; 8]));
    }

    #[test]
    fn snapshot_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.bin");
        {
            let mut s = CloudStore::with_snapshot(&path).unwrap();
            s.put([1; 16], rec(0), Millis(1)).unwrap();
            s.put([2; 16], rec(1), Millis(2)).unwrap();
            s.put([1; 16], rec(2), Millis(3)).unwrap();
        }
        let loaded = CloudStore::load_snapshot(&path).unwrap();
        assert_eq!(loaded.len(), 3);
        assert_eq!(loaded.get(&[1; 16], 1).unwrap().record, rec(2));
        assert_eq!(loaded.get(&[1; 16], 1).unwrap().stored_at, Millis(3));

        let mut bytes = std::fs::read(&path).unwrap();
        bytes.pop();
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(CloudStore::load_snapshot(&path), Err(StorageError::Corrupt(_))));
    }
}
