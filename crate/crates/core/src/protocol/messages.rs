//! Handshake messages and their big-endian wire encodings.

use crate::crypto::{CurveParams, CurvePoint, HASH_LEN};

use super::{Id, Millis, ProtocolError, ID_LEN};

pub type Digest = [u8; HASH_LEN];

/// Sensor → access point: a_sn(32) ‖ s1(32) ‖ s2(32) ‖ t1(8) ‖ point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuthRequest {
    pub a_sn: Digest,
    pub s1: Digest,
    pub s2: Digest,
    pub t1: Millis,
    pub eph_pk: CurvePoint,
}

/// Access point → server: AuthRequest ‖ ap_id(16).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForwardedRequest {
    pub inner: AuthRequest,
    pub ap_id: Id,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RejectReason {
    UnknownSensor = 1,
    ApMismatch = 2,
    StaleTimestamp = 3,
    Replay = 4,
    BadMac = 5,
}

impl RejectReason {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            1 => RejectReason::UnknownSensor,
            2 => RejectReason::ApMismatch,
            3 => RejectReason::StaleTimestamp,
            4 => RejectReason::Replay,
            5 => RejectReason::BadMac,
            _ => return None,
        })
    }
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        std::fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AuthStatus {
    Accept,
    Reject(RejectReason),
}

/// Server → sensor: status(1) ‖ reason(1) ‖ n2_star(32) ‖ point ‖ t2(8).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuthResponse {
    pub status: AuthStatus,
    pub n2_star: Digest,
    pub server_eph_pk: CurvePoint,
    pub t2: Millis,
}

impl AuthResponse {
    pub fn reject(reason: RejectReason, now: Millis) -> Self {
        AuthResponse {
            status: AuthStatus::Reject(reason),
            n2_star: [0; HASH_LEN],
            server_eph_pk: CurvePoint::Infinity,
            t2: now,
        }
    }

    pub fn is_accept(&self) -> bool {
        self.status == AuthStatus::Accept
    }
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ProtocolError> {
        if self.buf.len() < n {
            return Err(ProtocolError::Malformed("truncated message"));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn digest(&mut self) -> Result<Digest, ProtocolError> {
        Ok(self.take(HASH_LEN)?.try_into().unwrap())
    }

    fn id(&mut self) -> Result<Id, ProtocolError> {
        Ok(self.take(ID_LEN)?.try_into().unwrap())
    }

    fn millis(&mut self) -> Result<Millis, ProtocolError> {
        Ok(Millis(u64::from_be_bytes(self.take(8)?.try_into().unwrap())))
    }

    fn point(&mut self, curve: &CurveParams) -> Result<CurvePoint, ProtocolError> {
        let tag = *self.buf.first().ok_or(ProtocolError::Malformed("missing point"))?;
        let len = curve.encoded_point_len(tag).ok_or(ProtocolError::Malformed("bad point tag"))?;
        let raw = self.take(len)?;
        curve.decode_point(raw).map_err(|_| ProtocolError::Malformed("bad point"))
    }

    fn finish(self) -> Result<(), ProtocolError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(ProtocolError::Malformed("trailing bytes"))
        }
    }
}

impl AuthRequest {
    pub fn encode(&self, curve: &CurveParams) -> Vec<u8> {
        let mut out = Vec::with_capacity(3 * HASH_LEN + 8 + 65);
        out.extend_from_slice(&self.a_sn);
        out.extend_from_slice(&self.s1);
        out.extend_from_slice(&self.s2);
        out.extend_from_slice(&self.t1.0.to_be_bytes());
        out.extend_from_slice(&curve.encode_point(&self.eph_pk));
        out
    }

    pub fn decode(bytes: &[u8], curve: &CurveParams) -> Result<Self, ProtocolError> {
        let mut r = Reader { buf: bytes };
        let req = Self::read(&mut r, curve)?;
        r.finish()?;
        Ok(req)
    }

    fn read(r: &mut Reader<'_>, curve: &CurveParams) -> Result<Self, ProtocolError> {
        Ok(AuthRequest {
            a_sn: r.digest()?,
            s1: r.digest()?,
            s2: r.digest()?,
            t1: r.millis()?,
            eph_pk: r.point(curve)?,
        })
    }
}

impl ForwardedRequest {
    pub fn encode(&self, curve: &CurveParams) -> Vec<u8> {
        let mut out = self.inner.encode(curve);
        out.extend_from_slice(&self.ap_id);
        out
    }

    pub fn decode(bytes: &[u8], curve: &CurveParams) -> Result<Self, ProtocolError> {
        let mut r = Reader { buf: bytes };
        let inner = AuthRequest::read(&mut r, curve)?;
        let ap_id = r.id()?;
        r.finish()?;
        Ok(ForwardedRequest { inner, ap_id })
    }
}

impl AuthResponse {
    pub fn encode(&self, curve: &CurveParams) -> Vec<u8> {
        let mut out = Vec::with_capacity(2 + HASH_LEN + 65 + 8);
        match self.status {
            AuthStatus::Accept => out.extend_from_slice(&[0, 0]),
            AuthStatus::Reject(reason) => out.extend_from_slice(&[1, reason.code()]),
        }
        out.extend_from_slice(&self.n2_star);
        out.extend_from_slice(&curve.encode_point(&self.server_eph_pk));
        out.extend_from_slice(&self.t2.0.to_be_bytes());
        out
    }

    pub fn decode(bytes: &[u8], curve: &CurveParams) -> Result<Self, ProtocolError> {
        let mut r = Reader { buf: bytes };
        let head = r.take(2)?;
        let status = match (head[0], head[1]) {
            (0, 0) => AuthStatus::Accept,
            (1, code) => {
                AuthStatus::Reject(RejectReason::from_code(code).ok_or(ProtocolError::Malformed("bad reason"))?)
            }
            _ => return Err(ProtocolError::Malformed("bad status")),
        };
        let resp = AuthResponse { status, n2_star: r.digest()?, server_eph_pk: r.point(curve)?, t2: r.millis()? };
        r.finish()?;
        Ok(resp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{keypair_gen, CurveId};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn arb_point(curve: CurveParams) -> impl Strategy<Value = CurvePoint> {
        any::<u64>().prop_map(move |seed| {
            if seed % 7 == 0 {
                CurvePoint::Infinity
            } else {
                keypair_gen(&mut ChaCha8Rng::seed_from_u64(seed), &curve).pk
            }
        })
    }

    fn arb_request(curve: CurveParams) -> impl Strategy<Value = AuthRequest> {
        (any::<[u8; 32]>(), any::<[u8; 32]>(), any::<[u8; 32]>(), any::<u64>(), arb_point(curve))
            .prop_map(|(a_sn, s1, s2, t1, eph_pk)| AuthRequest { a_sn, s1, s2, t1: Millis(t1), eph_pk })
    }

    #[test]
    fn request_layout() {
        let c = CurveId::Toy17.params();
        let req = AuthRequest { a_sn: [1; 32], s1: [2; 32], s2: [3; 32], t1: Millis(258), eph_pk: c.g };
        let bytes = req.encode(&c);
        assert_eq!(bytes.len(), 96 + 8 + 3);
        assert_eq!(&bytes[96..104], &[0, 0, 0, 0, 0, 0, 1, 2]);
        assert_eq!(&bytes[104..], &[4, 5, 1]);
        let fwd = ForwardedRequest { inner: req.clone(), ap_id: [9; 16] };
        let fbytes = fwd.encode(&c);
        assert_eq!(&fbytes[..bytes.len()], &bytes[..]);
        assert_eq!(&fbytes[bytes.len()..], &[9; 16]);
    }

    #[test]
    fn response_status_codes() {
        let c = CurveId::Toy17.params();
        let rej = AuthResponse::reject(RejectReason::Replay, Millis(1));
        let bytes = rej.encode(&c);
        assert_eq!(&bytes[..2], &[1, 4]);
        assert_eq!(bytes.len(), 2 + 32 + 1 + 8);
        let mut bad = bytes.clone();
        bad[1] = 9;
        assert!(AuthResponse::decode(&bad, &c).is_err());
    }

    #[test]
    fn truncated_and_trailing_rejected() {
        let c = CurveId::Std256.params();
        let req = AuthRequest { a_sn: [1; 32], s1: [2; 32], s2: [3; 32], t1: Millis(5), eph_pk: c.g };
        let bytes = req.encode(&c);
        assert!(AuthRequest::decode(&bytes[..bytes.len() - 1], &c).is_err());
        let mut long = bytes.clone();
        long.push(0);
        assert!(AuthRequest::decode(&long, &c).is_err());
        assert!(AuthRequest::decode(&[], &c).is_err());
    }

    proptest! {
        #[test]
        fn messages_roundtrip(req in arb_request(CurveId::Std256.params()), ap in any::<[u8; 16]>(),
                              n2 in any::<[u8; 32]>(), t2 in any::<u64>(), code in 0u8..6) {
            let c = CurveId::Std256.params();
            prop_assert_eq!(AuthRequest::decode(&req.encode(&c), &c).unwrap(), req.clone());
            let fwd = ForwardedRequest { inner: req.clone(), ap_id: ap };
            prop_assert_eq!(ForwardedRequest::decode(&fwd.encode(&c), &c).unwrap(), fwd);
            let status = RejectReason::from_code(code).map_or(AuthStatus::Accept, AuthStatus::Reject);
            let resp = AuthResponse { status, n2_star: n2, server_eph_pk: req.eph_pk, t2: Millis(t2) };
            prop_assert_eq!(AuthResponse::decode(&resp.encode(&c), &c).unwrap(), resp);
        }
    }
}
