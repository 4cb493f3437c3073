//! Python bindings. Byte strings cross the boundary as `bytes`; node
//! identities are at most 16 bytes and are zero-padded on the right.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wbsn_core::crypto::{
    ecdh_shared, hash, kdf, point_add, scalar_mul, CurveId, CurveParams, CurvePoint, EncryptedRecord, KeyPair,
    Rc4State, RecordCipher, Scalar, SessionKey, NONCE_LEN, U256,
};
use wbsn_core::dos_filter::{AdmissionPolicy, BoundIdentity, DropCounts, DropReason, Envelope, FilterDecision};
use wbsn_core::protocol::{
    self, AuthRequest, AuthResponse, AuthStatus, ForwardedRequest, Id, MasterKey, Millis, SensorCredential, ServerDb,
    SessionContext, ID_LEN,
};
use wbsn_core::simnet::{self, LatencyStats, MetricsRecord, SchemeMode};

create_exception!(wbsn, WbsnError, PyException);

fn fail(e: impl std::fmt::Display) -> PyErr {
    WbsnError::new_err(e.to_string())
}

fn node_id(bytes: &[u8]) -> PyResult<Id> {
    if bytes.len() > ID_LEN {
        return Err(fail(format!("identity is {} bytes, at most {ID_LEN} allowed", bytes.len())));
    }
    let mut id = [0u8; ID_LEN];
    id[..bytes.len()].copy_from_slice(bytes);
    Ok(id)
}

fn curve_params(name: &str) -> PyResult<(CurveId, CurveParams)> {
    let id: CurveId = name.parse().map_err(fail)?;
    Ok((id, id.params()))
}

fn scalar_arg(k: &Bound<'_, PyAny>, curve: &CurveParams) -> PyResult<Scalar> {
    if let Ok(v) = k.extract::<u64>() {
        return Ok(Scalar::from_u64(v, curve));
    }
    let bytes: &[u8] = k.extract().map_err(|_| fail("scalar must be a non-negative int or big-endian bytes"))?;
    let value = U256::from_be_slice(bytes).ok_or_else(|| fail("scalar longer than 32 bytes"))?;
    Ok(Scalar::new(value, curve))
}

/// One of the built-in curves: "toy17" or "std256". Points are SEC1
/// uncompressed bytes; the point at infinity is a single zero byte.
#[pyclass(module = "wbsn", frozen)]
struct Curve {
    id: CurveId,
    params: CurveParams,
}

impl Curve {
    fn point(&self, bytes: &[u8]) -> PyResult<CurvePoint> {
        self.params.decode_point(bytes).map_err(fail)
    }
}

#[pymethods]
impl Curve {
    #[new]
    #[pyo3(signature = (name = "std256"))]
    fn new(name: &str) -> PyResult<Self> {
        let (id, params) = curve_params(name)?;
        Ok(Curve { id, params })
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.id.name()
    }

    /// Field element width in bytes.
    #[getter]
    fn width(&self) -> usize {
        self.params.width()
    }

    fn generator(&self) -> Vec<u8> {
        self.params.encode_point(&self.params.g)
    }

    fn is_on_curve(&self, point: &[u8]) -> bool {
        self.params.decode_point(point).is_ok_and(|p| self.params.is_on_curve(&p))
    }

    fn add(&self, a: &[u8], b: &[u8]) -> PyResult<Vec<u8>> {
        let sum = point_add(&self.point(a)?, &self.point(b)?, &self.params).map_err(fail)?;
        Ok(self.params.encode_point(&sum))
    }

    fn mul(&self, k: &Bound<'_, PyAny>, point: &[u8]) -> PyResult<Vec<u8>> {
        let k = scalar_arg(k, &self.params)?;
        let q = scalar_mul(&k, &self.point(point)?, &self.params).map_err(fail)?;
        Ok(self.params.encode_point(&q))
    }

    /// Returns `(private_scalar, public_point)`.
    fn keypair(&self, sk: &Bound<'_, PyAny>) -> PyResult<(Vec<u8>, Vec<u8>)> {
        let pair = KeyPair::from_scalar(scalar_arg(sk, &self.params)?, &self.params).map_err(fail)?;
        Ok((pair.sk.to_bytes(&self.params), self.params.encode_point(&pair.pk)))
    }

    /// Hashed x-coordinate of `sk * peer`.
    fn ecdh(&self, sk: &Bound<'_, PyAny>, peer: &[u8]) -> PyResult<Vec<u8>> {
        let sk = scalar_arg(sk, &self.params)?;
        let secret = ecdh_shared(&sk, &self.point(peer)?, &self.params).map_err(fail)?;
        Ok(secret.0.to_vec())
    }

    fn __repr__(&self) -> String {
        format!("Curve('{}')", self.id.name())
    }
}

#[pyfunction]
#[pyo3(name = "hash", signature = (*parts))]
fn hash_parts(parts: Vec<Vec<u8>>) -> Vec<u8> {
    let refs: Vec<&[u8]> = parts.iter().map(Vec::as_slice).collect();
    hash(&refs).to_vec()
}

#[pyfunction]
#[pyo3(signature = (key, data, drop = 0))]
fn rc4(key: &[u8], data: &[u8], drop: usize) -> PyResult<Vec<u8>> {
    let mut state = Rc4State::with_drop(key, drop).map_err(fail)?;
    let mut out = data.to_vec();
    state.apply_in_place(&mut out);
    Ok(out)
}

/// Symmetric key from `kdf(secret, context)`, able to seal and open records.
#[pyclass(module = "wbsn", frozen)]
struct Key {
    key: SessionKey,
    cipher: RecordCipher,
}

#[pymethods]
impl Key {
    #[new]
    #[pyo3(signature = (secret, context, rc4_drop = 0))]
    fn new(secret: &[u8], context: &[u8], rc4_drop: usize) -> PyResult<Self> {
        Ok(Key { key: kdf(secret, context).map_err(fail)?, cipher: RecordCipher::new(rc4_drop) })
    }

    #[getter]
    fn key(&self) -> Vec<u8> {
        self.key.key.to_vec()
    }

    #[getter]
    fn key_id(&self) -> Vec<u8> {
        self.key.key_id.to_vec()
    }

    fn seal(&self, nonce: &[u8], plaintext: &[u8]) -> PyResult<Vec<u8>> {
        let nonce: [u8; NONCE_LEN] = nonce.try_into().map_err(|_| fail(format!("nonce must be {NONCE_LEN} bytes")))?;
        Ok(self.cipher.seal(&self.key, &nonce, plaintext).to_bytes())
    }

    fn open(&self, record: &[u8]) -> PyResult<Vec<u8>> {
        let record = EncryptedRecord::from_bytes(record).map_err(fail)?;
        self.cipher.open(&self.key, &record).map_err(fail)
    }
}

/// An established session. Each `seal` uses the next counter nonce.
#[pyclass(module = "wbsn")]
struct Session {
    ctx: SessionContext,
}

#[pymethods]
impl Session {
    #[getter]
    fn key_id(&self) -> Vec<u8> {
        self.ctx.session_key.key_id.to_vec()
    }

    #[getter]
    fn sensor_id(&self) -> Vec<u8> {
        self.ctx.sensor_id.to_vec()
    }

    #[getter]
    fn nonce_counter(&self) -> u64 {
        self.ctx.nonce_counter
    }

    fn seal(&mut self, plaintext: &[u8]) -> Vec<u8> {
        protocol::submit_record(&mut self.ctx, plaintext).to_bytes()
    }

    fn open(&self, record: &[u8]) -> PyResult<Vec<u8>> {
        let record = EncryptedRecord::from_bytes(record).map_err(fail)?;
        protocol::read_record(&self.ctx, &record).map_err(fail)
    }
}

/// `(accepted, reason, response_bytes, session)` from [`Server::verify`].
type Verdict = (bool, Option<String>, Vec<u8>, Option<Session>);

/// Authentication server holding the master key and sensor registry.
#[pyclass(module = "wbsn")]
struct Server {
    master: MasterKey,
    db: ServerDb,
    params: CurveParams,
    window: Millis,
    rng: ChaCha8Rng,
}

#[pymethods]
impl Server {
    #[new]
    #[pyo3(signature = (seed = 0, curve = "std256", freshness_window_ms = 2000))]
    fn new(seed: u64, curve: &str, freshness_window_ms: u64) -> PyResult<Self> {
        let (_, params) = curve_params(curve)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (master, db) = protocol::server_init(&mut rng, &params);
        Ok(Server { master, db, params, window: Millis(freshness_window_ms), rng })
    }

    #[getter]
    fn public_key(&self) -> Vec<u8> {
        self.params.encode_point(&self.master.server_keypair.pk)
    }

    #[getter]
    fn registered(&self) -> usize {
        self.db.len()
    }

    #[getter]
    fn replay_cache_len(&self) -> usize {
        self.db.replay_cache_len()
    }

    fn register_access_point(&mut self, ap_id: &[u8]) -> PyResult<()> {
        protocol::register_access_point(&mut self.db, node_id(ap_id)?);
        Ok(())
    }

    /// Enrolls a sensor behind a registered access point.
    fn register_sensor(&mut self, id: &[u8], ap_id: &[u8]) -> PyResult<Sensor> {
        let cred = protocol::register_sensor(&mut self.db, &self.master, node_id(id)?, node_id(ap_id)?, &mut self.rng)
            .map_err(fail)?;
        let rng = ChaCha8Rng::from_rng(&mut self.rng).map_err(fail)?;
        Ok(Sensor { cred, params: self.params.clone(), rng, pending: None })
    }

    /// Checks a forwarded request at `now_ms`. Returns
    /// `(accepted, reason, response_bytes, session)`.
    fn verify(&mut self, request: &[u8], now_ms: u64) -> PyResult<Verdict> {
        let fwd = ForwardedRequest::decode(request, &self.params).map_err(fail)?;
        let (resp, ctx) = protocol::server_verify(
            &mut self.db,
            &self.master,
            &fwd,
            &Millis(now_ms),
            self.window,
            &self.params,
            &mut self.rng,
        );
        let reason = match resp.status {
            AuthStatus::Accept => None,
            AuthStatus::Reject(r) => Some(r.to_string()),
        };
        Ok((resp.is_accept(), reason, resp.encode(&self.params), ctx.map(|ctx| Session { ctx })))
    }
}

/// A registered sensor's credential plus its pending handshake, if any.
#[pyclass(module = "wbsn")]
struct Sensor {
    cred: SensorCredential,
    params: CurveParams,
    rng: ChaCha8Rng,
    pending: Option<(AuthRequest, Scalar)>,
}

#[pymethods]
impl Sensor {
    #[getter]
    fn id(&self) -> Vec<u8> {
        self.cred.id_sn.to_vec()
    }

    #[getter]
    fn pseudonym(&self) -> Vec<u8> {
        self.cred.a_sn.to_vec()
    }

    #[getter]
    fn ap_id(&self) -> Vec<u8> {
        self.cred.ap_id.to_vec()
    }

    /// Builds an authentication request timestamped `now_ms`, already
    /// relayed through the sensor's access point.
    fn begin_auth(&mut self, now_ms: u64) -> Vec<u8> {
        let (req, eph) = protocol::begin_auth(&self.cred, &Millis(now_ms), &mut self.rng, &self.params);
        let wire = protocol::ap_forward(&req, self.cred.ap_id).encode(&self.params);
        self.pending = Some((req, eph));
        wire
    }

    /// Verifies the server's proof and derives the session.
    fn confirm(&mut self, response: &[u8]) -> PyResult<Session> {
        let (req, eph) = self.pending.as_ref().ok_or_else(|| fail("no authentication in progress"))?;
        let resp = AuthResponse::decode(response, &self.params).map_err(fail)?;
        let ctx = protocol::sensor_confirm(&self.cred, eph, req, &resp, &self.params).map_err(fail)?;
        self.pending = None;
        Ok(Session { ctx })
    }
}

/// Re-tags a forwarded request as coming from another access point.
#[pyfunction]
#[pyo3(signature = (request, ap_id, curve = "std256"))]
fn reroute(request: &[u8], ap_id: &[u8], curve: &str) -> PyResult<Vec<u8>> {
    let (_, params) = curve_params(curve)?;
    let fwd = ForwardedRequest::decode(request, &params).map_err(fail)?;
    Ok(protocol::ap_forward(&fwd.inner, node_id(ap_id)?).encode(&params))
}

fn drops_dict<'py>(py: Python<'py>, d: &DropCounts) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("low_power", d.low_power)?;
    out.set_item("identity", d.identity)?;
    out.set_item("rate", d.rate)?;
    Ok(out)
}

/// Gateway admission filter: identity binding, minimum residual power and
/// a per-sender token bucket, checked in that order.
#[pyclass(module = "wbsn")]
struct DosFilter {
    inner: wbsn_core::dos_filter::DosFilter,
}

#[pymethods]
impl DosFilter {
    /// Policy values left as `None` take the defaults derived from `legit_rate`.
    #[new]
    #[pyo3(signature = (gateway_id, secret, legit_rate = 1.0, min_power = None, token_rate = None, bucket_capacity = None, per_packet_cost = None))]
    fn new(
        gateway_id: &[u8],
        secret: &[u8],
        legit_rate: f64,
        min_power: Option<f64>,
        token_rate: Option<f64>,
        bucket_capacity: Option<f64>,
        per_packet_cost: Option<f64>,
    ) -> PyResult<Self> {
        let mut policy = AdmissionPolicy::for_legit_rate(legit_rate);
        policy.min_power = min_power.unwrap_or(policy.min_power);
        policy.token_rate = token_rate.unwrap_or(policy.token_rate);
        policy.bucket_capacity = bucket_capacity.unwrap_or(policy.bucket_capacity);
        policy.per_packet_cost = per_packet_cost.unwrap_or(policy.per_packet_cost);
        let key = kdf(secret, b"gateway-admission").map_err(fail)?;
        let inner = wbsn_core::dos_filter::DosFilter::new(node_id(gateway_id)?, key, policy).map_err(fail)?;
        Ok(DosFilter { inner })
    }

    /// Adds a sender with `energy` residual power; returns its binding.
    fn register(&mut self, sender: &[u8], energy: f64, now_ms: u64) -> PyResult<Vec<u8>> {
        Ok(self.inner.register_sender(node_id(sender)?, energy, Millis(now_ms)).0.to_vec())
    }

    /// "admit", or the drop reason: "identity", "low_power" or "rate".
    fn admit(&mut self, sender: &[u8], binding: &[u8], now_ms: u64) -> PyResult<&'static str> {
        let binding = BoundIdentity(binding.try_into().map_err(|_| fail("binding must be 32 bytes"))?);
        let envelope = Envelope { sender: node_id(sender)?, binding };
        Ok(match self.inner.admit(&envelope, Millis(now_ms)).map_err(fail)? {
            FilterDecision::Admit => "admit",
            FilterDecision::Drop(DropReason::IdentityMismatch) => "identity",
            FilterDecision::Drop(DropReason::LowPower) => "low_power",
            FilterDecision::Drop(DropReason::RateExceeded) => "rate",
        })
    }

    fn residual_energy(&self, sender: &[u8]) -> PyResult<Option<f64>> {
        Ok(self.inner.sender(&node_id(sender)?).map(|s| s.energy.residual))
    }

    fn drops<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        drops_dict(py, &self.inner.drops())
    }
}

/// Scenario settings. Keys are the dotted names accepted by the CLI config
/// file, e.g. `cfg.set("attack.count", 5)`.
#[pyclass(module = "wbsn")]
struct ScenarioConfig {
    inner: simnet::ScenarioConfig,
}

#[pymethods]
impl ScenarioConfig {
    #[new]
    #[pyo3(signature = (text = ""))]
    fn new(text: &str) -> PyResult<Self> {
        Ok(ScenarioConfig { inner: simnet::ScenarioConfig::from_text(text).map_err(fail)? })
    }

    fn set(&mut self, key: &str, value: &Bound<'_, PyAny>) -> PyResult<()> {
        let text = match value.extract::<bool>() {
            Ok(b) => b.to_string(),
            Err(_) => value.str()?.to_string(),
        };
        if !self.inner.set(key, &text).map_err(fail)? {
            return Err(fail(format!("unknown key '{key}'")));
        }
        Ok(())
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(fail)
    }

    #[getter]
    fn mode(&self) -> &'static str {
        self.inner.scheme_mode.name()
    }

    #[getter]
    fn mitigation(&self) -> bool {
        self.inner.mitigation_on
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn n_sensors(&self) -> usize {
        self.inner.n_sensors
    }

    #[getter]
    fn attacker_count(&self) -> usize {
        self.inner.attacker_count
    }

    #[getter]
    fn duration_s(&self) -> f64 {
        self.inner.duration_s
    }
}

fn latency_dict<'py>(py: Python<'py>, s: &LatencyStats) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("mean", s.mean)?;
    out.set_item("p50", s.p50)?;
    out.set_item("p99", s.p99)?;
    out.set_item("count", s.count)?;
    Ok(out)
}

fn metrics_dict<'py>(py: Python<'py>, m: &MetricsRecord) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("mode", m.mode.name())?;
    out.set_item("mitigation_on", m.mitigation_on)?;
    out.set_item("attacker_count", m.attacker_count)?;
    out.set_item("seed", m.seed)?;
    out.set_item("sent", m.sent)?;
    out.set_item("received", m.received)?;
    out.set_item("lost", m.lost)?;
    out.set_item("loss_fraction", m.loss_fraction())?;
    out.set_item("attack_sent", m.attack_sent)?;
    out.set_item("attack_dropped", m.attack_dropped)?;
    out.set_item("attack_accepted", m.attack_accepted)?;
    out.set_item("throughput_bps", m.throughput_bps)?;
    out.set_item("auth_ok", m.auth_ok)?;
    out.set_item("auth_fail", m.auth_fail)?;
    out.set_item("filter_drops", drops_dict(py, &m.filter_drops)?)?;
    out.set_item("encrypt_ns", latency_dict(py, &m.encrypt_ns)?)?;
    out.set_item("decrypt_ns", latency_dict(py, &m.decrypt_ns)?)?;
    out.set_item("queue_peak", m.queue_peak)?;
    out.set_item("mean_queue_depth", m.mean_queue_depth)?;
    out.set_item("events", m.events)?;
    Ok(out)
}

/// Runs one scenario with the interpreter lock released and returns its
/// metrics as a dict.
#[pyfunction]
fn run_scenario<'py>(py: Python<'py>, config: &ScenarioConfig) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config.inner.clone();
    let record = py.detach(move || simnet::run_scenario(&cfg)).map_err(fail)?;
    metrics_dict(py, &record)
}

#[pymodule]
fn wbsn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("WbsnError", m.py().get_type::<WbsnError>())?;
    m.add("SCHEME_MODES", SchemeMode::ALL.map(SchemeMode::name).to_vec())?;
    m.add_class::<Curve>()?;
    m.add_class::<Key>()?;
    m.add_class::<Session>()?;
    m.add_class::<Server>()?;
    m.add_class::<Sensor>()?;
    m.add_class::<DosFilter>()?;
    m.add_class::<ScenarioConfig>()?;
    m.add_function(wrap_pyfunction!(hash_parts, m)?)?;
    m.add_function(wrap_pyfunction!(rc4, m)?)?;
    m.add_function(wrap_pyfunction!(reroute, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
