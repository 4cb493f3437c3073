use rand::RngCore;

use crate::crypto::{ecdh_shared, hash, kdf, keypair_gen, CurveParams, Scalar};

use super::messages::{AuthRequest, AuthResponse, AuthStatus, ForwardedRequest};
use super::{Clock, Id, ProtocolError, SensorCredential, SessionContext};

/// Builds an authentication request and returns it with the ephemeral
/// private scalar the sensor must keep for [`sensor_confirm`].
///
/// s1 = H(b_sn ‖ t1) ⊕ n1 for a fresh 32-byte n1, and
/// s2 = H(b_sn ‖ a_sn ‖ s1 ‖ t1 ‖ eph_pk).
pub fn begin_auth<R: RngCore + ?Sized>(
    cred: &SensorCredential,
    clock: &impl Clock,
    rng: &mut R,
    curve: &CurveParams,
) -> (AuthRequest, Scalar) {
    let t1 = clock.now();
    let mut n1 = [0u8; 32];
    rng.fill_bytes(&mut n1);
    let mask = hash(&[&cred.b_sn, &t1.to_be_bytes()]);
    let mut s1 = n1;
    s1.iter_mut().zip(mask).for_each(|(b, m)| *b ^= m);
    let eph = keypair_gen(rng, curve);
    let s2 = hash(&[&cred.b_sn, &cred.a_sn, &s1, &t1.to_be_bytes(), &curve.encode_point(&eph.pk)]);
    (AuthRequest { a_sn: cred.a_sn, s1, s2, t1, eph_pk: eph.pk }, eph.sk)
}

/// Access point relay: tags the request with the forwarding AP's identity.
pub fn ap_forward(req: &AuthRequest, ap_id: Id) -> ForwardedRequest {
    ForwardedRequest { inner: req.clone(), ap_id }
}

/// Verifies N2* and derives the same session key the server did.
pub fn sensor_confirm(
    cred: &SensorCredential,
    eph_sk: &Scalar,
    req: &AuthRequest,
    resp: &AuthResponse,
    curve: &CurveParams,
) -> Result<SessionContext, ProtocolError> {
    if let AuthStatus::Reject(reason) = resp.status {
        return Err(ProtocolError::Rejected(reason));
    }
    let expect = hash(&[&cred.b_sn, &req.s1, &curve.encode_point(&resp.server_eph_pk)]);
    if expect != resp.n2_star {
        return Err(ProtocolError::ServerAuthFailure);
    }
    let shared = ecdh_shared(eph_sk, &resp.server_eph_pk, curve).map_err(|_| ProtocolError::ServerAuthFailure)?;
    let session_key = kdf(&shared.0, &[req.a_sn.as_slice(), req.s1.as_slice()].concat())?;
    Ok(SessionContext { session_key, sensor_id: cred.id_sn, established_at: resp.t2, nonce_counter: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::CurveId;
    use crate::protocol::{
        read_record, register_access_point, register_sensor, server_init, server_verify, submit_record, Millis,
        RejectReason, DEFAULT_FRESHNESS_WINDOW,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    const AP1: Id = [0xA1; 16];
    const AP2: Id = [0xA2; 16];

    struct World {
        master: crate::protocol::MasterKey,
        db: crate::protocol::ServerDb,
        cred: SensorCredential,
        rng: ChaCha8Rng,
        curve: CurveParams,
    }

    fn world(curve: CurveId, seed: u64) -> World {
        let curve = curve.params();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (master, mut db) = server_init(&mut rng, &curve);
        register_access_point(&mut db, AP1);
        register_access_point(&mut db, AP2);
        let cred = register_sensor(&mut db, &master, [3; 16], AP1, &mut rng).unwrap();
        World { master, db, cred, rng, curve }
    }

    #[test]
    fn honest_handshake_agrees() {
        let mut w = world(CurveId::Std256, 1);
        let (req, eph) = begin_auth(&w.cred, &Millis(500), &mut w.rng, &w.curve);
        assert_eq!(req.t1, Millis(500));
        let fwd = ap_forward(&req, AP1);
        assert_eq!(fwd.inner, req);
        assert_eq!(fwd.ap_id, AP1);
        let (resp, server_ctx) =
            server_verify(&mut w.db, &w.master, &fwd, &Millis(600), DEFAULT_FRESHNESS_WINDOW, &w.curve, &mut w.rng);
        assert!(resp.is_accept());
        let server_ctx = server_ctx.unwrap();
        let mut sensor_ctx = sensor_confirm(&w.cred, &eph, &req, &resp, &w.curve).unwrap();
        assert_eq!(sensor_ctx.session_key, server_ctx.session_key);
        assert_eq!(server_ctx.sensor_id, w.cred.id_sn);

        let rec = submit_record(&mut sensor_ctx, b"bp=120/80");
        assert_eq!(read_record(&server_ctx, &rec).unwrap(), b"bp=120/80");
    }

    #[test]
    fn s1_values_never_collide() {
        let mut w = world(CurveId::Toy17, 2);
        let mut seen = HashSet::new();
        for i in 0..10_000u64 {
            let (req, _) = begin_auth(&w.cred, &Millis(i / 3), &mut w.rng, &w.curve);
            assert!(seen.insert(req.s1));
        }
    }

    #[test]
    fn stale_request_rejected() {
        let mut w = world(CurveId::Toy17, 3);
        let (req, _) = begin_auth(&w.cred, &Millis(1000), &mut w.rng, &w.curve);
        let (resp, ctx) = server_verify(
            &mut w.db,
            &w.master,
            &ap_forward(&req, AP1),
            &Millis(3001),
            DEFAULT_FRESHNESS_WINDOW,
            &w.curve,
            &mut w.rng,
        );
        assert_eq!(resp.status, AuthStatus::Reject(RejectReason::StaleTimestamp));
        assert!(ctx.is_none());
        // timestamps from the future are just as stale
        let (req, _) = begin_auth(&w.cred, &Millis(9000), &mut w.rng, &w.curve);
        let (resp, _) = server_verify(
            &mut w.db,
            &w.master,
            &ap_forward(&req, AP1),
            &Millis(1000),
            DEFAULT_FRESHNESS_WINDOW,
            &w.curve,
            &mut w.rng,
        );
        assert_eq!(resp.status, AuthStatus::Reject(RejectReason::StaleTimestamp));
    }

    #[test]
    fn replayed_request_rejected() {
        let mut w = world(CurveId::Toy17, 4);
        let (req, _) = begin_auth(&w.cred, &Millis(10), &mut w.rng, &w.curve);
        let fwd = ap_forward(&req, AP1);
        let first =
            server_verify(&mut w.db, &w.master, &fwd, &Millis(20), DEFAULT_FRESHNESS_WINDOW, &w.curve, &mut w.rng);
        assert!(first.0.is_accept());
        let second =
            server_verify(&mut w.db, &w.master, &fwd, &Millis(30), DEFAULT_FRESHNESS_WINDOW, &w.curve, &mut w.rng);
        assert_eq!(second.0.status, AuthStatus::Reject(RejectReason::Replay));
    }

    #[test]
    fn double_forward_through_second_ap_rejected() {
        let mut w = world(CurveId::Toy17, 5);
        let (req, _) = begin_auth(&w.cred, &Millis(10), &mut w.rng, &w.curve);
        let via_first = ap_forward(&req, AP1);
        let rewrapped = ap_forward(&via_first.inner, AP2);
        let (resp, _) = server_verify(
            &mut w.db,
            &w.master,
            &rewrapped,
            &Millis(10),
            DEFAULT_FRESHNESS_WINDOW,
            &w.curve,
            &mut w.rng,
        );
        assert_eq!(resp.status, AuthStatus::Reject(RejectReason::ApMismatch));
    }

    #[test]
    fn tampered_mac_rejected() {
        let mut w = world(CurveId::Toy17, 6);
        let (mut req, _) = begin_auth(&w.cred, &Millis(10), &mut w.rng, &w.curve);
        req.s2[0] ^= 0x80;
        let (resp, _) = server_verify(
            &mut w.db,
            &w.master,
            &ap_forward(&req, AP1),
            &Millis(10),
            DEFAULT_FRESHNESS_WINDOW,
            &w.curve,
            &mut w.rng,
        );
        assert_eq!(resp.status, AuthStatus::Reject(RejectReason::BadMac));
    }

    #[test]
    fn flipped_server_proof_fails_mutual_auth() {
        let mut w = world(CurveId::Toy17, 7);
        let (req, eph) = begin_auth(&w.cred, &Millis(10), &mut w.rng, &w.curve);
        let (mut resp, _) = server_verify(
            &mut w.db,
            &w.master,
            &ap_forward(&req, AP1),
            &Millis(10),
            DEFAULT_FRESHNESS_WINDOW,
            &w.curve,
            &mut w.rng,
        );
        resp.n2_star[31] ^= 1;
        assert_eq!(sensor_confirm(&w.cred, &eph, &req, &resp, &w.curve), Err(ProtocolError::ServerAuthFailure));
    }

    #[test]
    fn rejection_surfaces_reason() {
        let mut w = world(CurveId::Toy17, 8);
        let (req, eph) = begin_auth(&w.cred, &Millis(10), &mut w.rng, &w.curve);
        let resp = AuthResponse::reject(RejectReason::Replay, Millis(10));
        assert_eq!(
            sensor_confirm(&w.cred, &eph, &req, &resp, &w.curve),
            Err(ProtocolError::Rejected(RejectReason::Replay))
        );
    }
}
