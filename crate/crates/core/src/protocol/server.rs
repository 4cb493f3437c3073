use std::collections::{BTreeSet, HashMap, HashSet, VecDeque};

use rand::RngCore;

use crate::crypto::{ecdh_shared, hash, kdf, keypair_gen, CurveParams, KeyPair};

use super::messages::{AuthResponse, AuthStatus, Digest, ForwardedRequest, RejectReason};
use super::{Clock, Id, Millis, ProtocolError, SensorCredential, SessionContext, SALT_LEN};

/// Maximum accepted |now − t1| for an authentication request.
pub const DEFAULT_FRESHNESS_WINDOW: Millis = Millis(2000);

/// Server-held secrets: the symmetric master secret behind every sensor's
/// b_sn and the long-term key pair.
#[derive(Clone, PartialEq, Eq)]
pub struct MasterKey {
    pub k_ser: [u8; 32],
    pub server_keypair: KeyPair,
}

impl std::fmt::Debug for MasterKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MasterKey").field("server_pk", &self.server_keypair.pk).finish_non_exhaustive()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegistryEntry {
    pub id_sn: Id,
    pub b_sn: Digest,
    pub ap_id: Id,
}

#[derive(Clone, Debug, Default)]
pub struct ServerDb {
    registry: HashMap<Digest, RegistryEntry>,
    ids: HashSet<Id>,
    seen: HashMap<(Digest, Digest), Millis>,
    expiry_queue: VecDeque<(Millis, (Digest, Digest))>,
    ap_list: BTreeSet<Id>,
}

impl ServerDb {
    pub fn len(&self) -> usize {
        self.registry.len()
    }

    pub fn is_empty(&self) -> bool {
        self.registry.is_empty()
    }

    pub fn lookup(&self, a_sn: &Digest) -> Option<&RegistryEntry> {
        self.registry.get(a_sn)
    }

    pub fn has_access_point(&self, ap_id: &Id) -> bool {
        self.ap_list.contains(ap_id)
    }

    pub fn replay_cache_len(&self) -> usize {
        self.seen.len()
    }

    fn purge_expired(&mut self, now: Millis) {
        while let Some((expiry, key)) = self.expiry_queue.front() {
            if *expiry > now {
                break;
            }
            if self.seen.get(key) == Some(expiry) {
                self.seen.remove(key);
            }
            self.expiry_queue.pop_front();
        }
    }

    fn is_replay(&self, key: &(Digest, Digest), now: Millis) -> bool {
        self.seen.get(key).is_some_and(|expiry| *expiry > now)
    }

    fn remember(&mut self, key: (Digest, Digest), expiry: Millis) {
        self.seen.insert(key, expiry);
        self.expiry_queue.push_back((expiry, key));
    }
}

/// Draws the master secret and long-term key pair; the registry starts empty.
pub fn server_init<R: RngCore + ?Sized>(rng: &mut R, curve: &CurveParams) -> (MasterKey, ServerDb) {
    let mut k_ser = [0u8; 32];
    rng.fill_bytes(&mut k_ser);
    let server_keypair = keypair_gen(rng, curve);
    (MasterKey { k_ser, server_keypair }, ServerDb::default())
}

pub fn register_access_point(db: &mut ServerDb, ap_id: Id) {
    db.ap_list.insert(ap_id);
}

/// b_sn = H(k_ser ‖ id_sn); a_sn = H(id_sn ‖ salt) with a fresh salt.
pub fn register_sensor<R: RngCore + ?Sized>(
    db: &mut ServerDb,
    master: &MasterKey,
    id_sn: Id,
    ap_id: Id,
    rng: &mut R,
) -> Result<SensorCredential, ProtocolError> {
    if db.ids.contains(&id_sn) {
        return Err(ProtocolError::DuplicateSensor);
    }
    if !db.ap_list.contains(&ap_id) {
        return Err(ProtocolError::UnknownAccessPoint);
    }
    let b_sn = hash(&[&master.k_ser, &id_sn]);
    let a_sn = loop {
        let mut salt = [0u8; SALT_LEN];
        rng.fill_bytes(&mut salt);
        let a = hash(&[&id_sn, &salt]);
        if !db.registry.contains_key(&a) {
            break a;
        }
    };
    db.ids.insert(id_sn);
    db.registry.insert(a_sn, RegistryEntry { id_sn, b_sn, ap_id });
    Ok(SensorCredential { id_sn, a_sn, b_sn, ap_id })
}

/// Unmasks n1 from s1 = H(b_sn ‖ t1) ⊕ n1.
pub fn recover_nonce(b_sn: &Digest, s1: &Digest, t1: Millis) -> Digest {
    let mask = hash(&[b_sn, &t1.to_be_bytes()]);
    let mut n1 = *s1;
    n1.iter_mut().zip(mask).for_each(|(b, m)| *b ^= m);
    n1
}

/// Checks, in order: registry membership and access point, timestamp
/// freshness, the replay cache, and finally the request MAC. Only a request
/// passing all four costs a key agreement.
///
/// Unknown senders are turned away before any hash or curve work.
pub fn server_verify<R: RngCore + ?Sized>(
    db: &mut ServerDb,
    _master: &MasterKey,
    fwd: &ForwardedRequest,
    clock: &impl Clock,
    window: Millis,
    curve: &CurveParams,
    rng: &mut R,
) -> (AuthResponse, Option<SessionContext>) {
    let now = clock.now();
    let req = &fwd.inner;
    let entry = match db.registry.get(&req.a_sn) {
        None => return (AuthResponse::reject(RejectReason::UnknownSensor, now), None),
        Some(e) if e.ap_id != fwd.ap_id => return (AuthResponse::reject(RejectReason::ApMismatch, now), None),
        Some(e) => e.clone(),
    };
    if now.abs_diff(req.t1) > window.0 {
        return (AuthResponse::reject(RejectReason::StaleTimestamp, now), None);
    }
    db.purge_expired(now);
    let cache_key = (req.a_sn, req.s1);
    if db.is_replay(&cache_key, now) {
        return (AuthResponse::reject(RejectReason::Replay, now), None);
    }
    let encoded_pk = curve.encode_point(&req.eph_pk);
    let s2 = hash(&[&entry.b_sn, &req.a_sn, &req.s1, &req.t1.to_be_bytes(), &encoded_pk]);
    if s2 != req.s2 {
        return (AuthResponse::reject(RejectReason::BadMac, now), None);
    }

    let server_eph = keypair_gen(rng, curve);
    // A MAC-valid share that is off the curve or degenerate is still unusable.
    let shared = match ecdh_shared(&server_eph.sk, &req.eph_pk, curve) {
        Ok(s) => s,
        Err(_) => return (AuthResponse::reject(RejectReason::BadMac, now), None),
    };
    let n2_star = hash(&[&entry.b_sn, &req.s1, &curve.encode_point(&server_eph.pk)]);
    let session_key = kdf(&shared.0, &[req.a_sn.as_slice(), req.s1.as_slice()].concat()).expect("nonempty secret");
    db.remember(cache_key, Millis(now.0 + 2 * window.0));

    let resp = AuthResponse { status: AuthStatus::Accept, n2_star, server_eph_pk: server_eph.pk, t2: now };
    let ctx = SessionContext { session_key, sensor_id: entry.id_sn, established_at: now, nonce_counter: 0 };
    (resp, Some(ctx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{CurveId, OpCounts};
    use crate::protocol::{ap_forward, begin_auth, AuthRequest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    const AP: Id = [0xA0; 16];

    fn setup(seed: u64) -> (MasterKey, ServerDb, ChaCha8Rng) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, mut db) = server_init(&mut rng, &CurveId::Toy17.params());
        register_access_point(&mut db, AP);
        (m, db, rng)
    }

    #[test]
    fn init_is_deterministic_and_empty() {
        let c = CurveId::Std256.params();
        let (a, db) = server_init(&mut ChaCha8Rng::seed_from_u64(3), &c);
        let (b, _) = server_init(&mut ChaCha8Rng::seed_from_u64(3), &c);
        assert_eq!(a, b);
        assert!(db.is_empty());
    }

    #[test]
    fn distinct_seeds_distinct_master_secrets() {
        let c = CurveId::Toy17.params();
        let keys: HashSet<_> =
            (0..1000u64).map(|s| server_init(&mut ChaCha8Rng::seed_from_u64(s), &c).0.k_ser).collect();
        assert_eq!(keys.len(), 1000);
    }

    #[test]
    fn registration_lookup_and_recompute() {
        let (m, mut db, mut rng) = setup(1);
        let cred = register_sensor(&mut db, &m, [1; 16], AP, &mut rng).unwrap();
        let entry = db.lookup(&cred.a_sn).unwrap();
        assert_eq!(entry.id_sn, [1; 16]);
        assert_eq!(entry.b_sn, hash(&[&m.k_ser, &[1u8; 16]]));
        assert_eq!(cred.b_sn, entry.b_sn);
        assert_eq!(db.len(), 1);
    }

    #[test]
    fn registration_errors() {
        let (m, mut db, mut rng) = setup(1);
        register_sensor(&mut db, &m, [1; 16], AP, &mut rng).unwrap();
        assert_eq!(register_sensor(&mut db, &m, [1; 16], AP, &mut rng), Err(ProtocolError::DuplicateSensor));
        assert_eq!(register_sensor(&mut db, &m, [2; 16], [0xEE; 16], &mut rng), Err(ProtocolError::UnknownAccessPoint));
        assert_eq!(db.len(), 1);
    }

    #[test]
    fn nonce_recoverable_from_s1() {
        let (m, mut db, mut rng) = setup(4);
        let c = CurveId::Toy17.params();
        let cred = register_sensor(&mut db, &m, [1; 16], AP, &mut rng).unwrap();
        let (req, _) = begin_auth(&cred, &Millis(77), &mut rng, &c);
        let n1 = recover_nonce(&cred.b_sn, &req.s1, req.t1);
        // masking again reproduces s1
        assert_eq!(recover_nonce(&cred.b_sn, &n1, req.t1), req.s1);
    }

    #[test]
    fn unknown_sensor_costs_nothing() {
        let (m, mut db, mut rng) = setup(5);
        let c = CurveId::Toy17.params();
        let req = AuthRequest { a_sn: [7; 32], s1: [1; 32], s2: [2; 32], t1: Millis(0), eph_pk: c.g };
        let fwd = ap_forward(&req, AP);
        let before = OpCounts::current();
        let (resp, ctx) = server_verify(&mut db, &m, &fwd, &Millis(0), DEFAULT_FRESHNESS_WINDOW, &c, &mut rng);
        assert_eq!(OpCounts::since(before), OpCounts::default());
        assert_eq!(resp.status, AuthStatus::Reject(RejectReason::UnknownSensor));
        assert!(ctx.is_none());
    }

    #[test]
    fn replay_cache_expires_after_twice_window() {
        let (m, mut db, mut rng) = setup(6);
        let c = CurveId::Toy17.params();
        let cred = register_sensor(&mut db, &m, [1; 16], AP, &mut rng).unwrap();
        let (req, _) = begin_auth(&cred, &Millis(1000), &mut rng, &c);
        let fwd = ap_forward(&req, AP);
        let w = DEFAULT_FRESHNESS_WINDOW;
        assert!(server_verify(&mut db, &m, &fwd, &Millis(1000), w, &c, &mut rng).0.is_accept());
        assert_eq!(db.replay_cache_len(), 1);
        let (resp, _) = server_verify(&mut db, &m, &fwd, &Millis(3000), w, &c, &mut rng);
        assert_eq!(resp.status, AuthStatus::Reject(RejectReason::Replay));
        let (resp, _) = server_verify(&mut db, &m, &fwd, &Millis(3001), w, &c, &mut rng);
        assert_eq!(resp.status, AuthStatus::Reject(RejectReason::StaleTimestamp));
        // a later, fresh request purges the expired entry
        let (req2, _) = begin_auth(&cred, &Millis(6000), &mut rng, &c);
        assert!(server_verify(&mut db, &m, &ap_forward(&req2, AP), &Millis(6000), w, &c, &mut rng).0.is_accept());
        assert_eq!(db.replay_cache_len(), 1);
    }
}
