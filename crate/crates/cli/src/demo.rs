//! Scripted single-sensor walk through all five phases.

use std::io::Write;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wbsn_core::crypto::{kdf, CurveId};
use wbsn_core::dos_filter::{AdmissionPolicy, DosFilter, Envelope, FilterDecision};
use wbsn_core::protocol::{
    ap_forward, begin_auth, read_record, register_access_point, register_sensor, sensor_confirm, server_init,
    server_verify, submit_record, AuthResponse, AuthStatus, Millis, Phase, DEFAULT_FRESHNESS_WINDOW,
};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Inject {
    StaleT1,
    Replay,
    BadMac,
}

impl FromStr for Inject {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "stale-t1" => Ok(Inject::StaleT1),
            "replay" => Ok(Inject::Replay),
            "bad-mac" => Ok(Inject::BadMac),
            _ => Err(format!("unknown fault '{s}' (expected stale-t1, replay or bad-mac)")),
        }
    }
}

const SENSOR_ID: [u8; 16] = *b"sensor-ecg-0001\0";
const AP_ID: [u8; 16] = *b"access-point-07\0";
const GATEWAY_ID: [u8; 16] = *b"gateway-main-01\0";

fn banner(out: &mut impl Write, phase: Phase) -> std::io::Result<()> {
    let n = Phase::ALL.iter().position(|p| *p == phase).unwrap() + 1;
    writeln!(out, "=== phase {n}/5: {} ===", phase.label())
}

fn check_accept(out: &mut impl Write, resp: &AuthResponse) -> Result<(), CliError> {
    writeln!(out, "  server -> sensor: {:?}", resp.status)?;
    match resp.status {
        AuthStatus::Accept => Ok(()),
        AuthStatus::Reject(reason) => Err(CliError::Demo(format!("authentication rejected: Reject({reason:?})"))),
    }
}

/// Runs the flow, writing a transcript to `out`. Any failing phase ends the
/// run with [`CliError::Demo`].
pub fn handshake_demo(inject: Option<Inject>, verbose: bool, out: &mut impl Write) -> Result<(), CliError> {
    let curve = CurveId::Std256.params();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);

    banner(out, Phase::Initialization)?;
    let (master, mut db) = server_init(&mut rng, &curve);
    register_access_point(&mut db, AP_ID);
    writeln!(out, "  server public key: {}", hex::encode(curve.encode_point(&master.server_keypair.pk)))?;
    if verbose {
        writeln!(out, "  curve: {} (field width {} bytes)", CurveId::Std256.name(), curve.width())?;
    }

    banner(out, Phase::Registration)?;
    let cred = register_sensor(&mut db, &master, SENSOR_ID, AP_ID, &mut rng)?;
    writeln!(out, "  sensor id: {}", hex::encode(cred.id_sn))?;
    writeln!(out, "  A_sn:      {}", hex::encode(cred.a_sn))?;
    if verbose {
        writeln!(out, "  access point: {}", hex::encode(cred.ap_id))?;
    }

    banner(out, Phase::Authentication)?;
    let t1 = Millis(10_000);
    let (mut req, eph) = begin_auth(&cred, &t1, &mut rng, &curve);
    if inject == Some(Inject::BadMac) {
        req.s2[0] ^= 0x01;
        writeln!(out, "  [fault] flipped one bit of the request MAC")?;
    }
    let fwd = ap_forward(&req, AP_ID);
    let wire = fwd.encode(&curve);
    writeln!(out, "  sensor -> AP -> server ({} bytes): {}", wire.len(), hex::encode(&wire))?;
    if verbose {
        writeln!(out, "  t1={} s1={} s2={}", req.t1.0, hex::encode(req.s1), hex::encode(req.s2))?;
    }
    let server_now = match inject {
        Some(Inject::StaleT1) => {
            let late = Millis(t1.0 + DEFAULT_FRESHNESS_WINDOW.0 + 1);
            writeln!(out, "  [fault] request delivered at t={} ms, past the freshness window", late.0)?;
            late
        }
        _ => Millis(t1.0 + 40),
    };
    let window = DEFAULT_FRESHNESS_WINDOW;
    let (resp, server_ctx) = server_verify(&mut db, &master, &fwd, &server_now, window, &curve, &mut rng);
    let resp_wire = resp.encode(&curve);
    writeln!(out, "  response ({} bytes): {}", resp_wire.len(), hex::encode(&resp_wire))?;
    check_accept(out, &resp)?;
    let server_ctx = server_ctx.ok_or_else(|| CliError::Demo("accepted without a session".into()))?;
    let mut sensor_ctx = sensor_confirm(&cred, &eph, &req, &resp, &curve)?;
    if sensor_ctx.session_key != server_ctx.session_key {
        return Err(CliError::Demo("session keys differ".into()));
    }
    writeln!(out, "  session key id: {}", hex::encode(sensor_ctx.session_key.key_id))?;
    if inject == Some(Inject::Replay) {
        writeln!(out, "  [fault] replaying the accepted request")?;
        let (again, _) = server_verify(&mut db, &master, &fwd, &Millis(server_now.0 + 5), window, &curve, &mut rng);
        check_accept(out, &again)?;
    }

    banner(out, Phase::DosMitigation)?;
    let gw_key = kdf(&master.k_ser, b"gateway-admission")?;
    let mut filter = DosFilter::new(GATEWAY_ID, gw_key, AdmissionPolicy::for_legit_rate(1.0))
        .map_err(|e| CliError::Demo(e.to_string()))?;
    let binding = filter.register_sender(cred.id_sn, 100.0, server_now);
    writeln!(out, "  identity binding: {}", hex::encode(binding.0))?;
    let envelope = Envelope { sender: cred.id_sn, binding };
    let decision = filter.admit(&envelope, Millis(server_now.0 + 100)).map_err(|e| CliError::Demo(e.to_string()))?;
    writeln!(out, "  gateway decision: {decision:?}")?;
    if decision != FilterDecision::Admit {
        return Err(CliError::Demo(format!("gateway dropped the sensor: {decision:?}")));
    }

    banner(out, Phase::EncryptionDecryption)?;
    let reading = b"hr=72;spo2=98;temp=36.8";
    let record = submit_record(&mut sensor_ctx, reading);
    writeln!(out, "  sealed record ({} bytes): {}", record.encoded_len(), hex::encode(record.to_bytes()))?;
    let opened = read_record(&server_ctx, &record)?;
    writeln!(out, "  server opened: {}", String::from_utf8_lossy(&opened))?;
    if opened != reading {
        return Err(CliError::Demo("decrypted reading differs".into()));
    }
    writeln!(out, "all phases completed")?;
    Ok(())
}

impl From<wbsn_core::protocol::ProtocolError> for CliError {
    fn from(e: wbsn_core::protocol::ProtocolError) -> Self {
        CliError::Demo(e.to_string())
    }
}

impl From<wbsn_core::crypto::CryptoError> for CliError {
    fn from(e: wbsn_core::crypto::CryptoError) -> Self {
        CliError::Demo(e.to_string())
    }
}
