//! Scenario configuration and the `key = value` text format it is read from.

use std::fmt;
use std::str::FromStr;

use crate::crypto::CurveId;
use crate::dos_filter::AdmissionPolicy;

use super::SimError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeMode {
    UserBased,
    /// Synthetic stand-in: pre-shared-key handshake, extra latency, 1.4× cost.
    CryptoBaseline,
    /// Synthetic stand-in: enrollment delay, 1.8× cost.
    BiometricBaseline,
}

impl SchemeMode {
    pub const ALL: [SchemeMode; 3] = [SchemeMode::UserBased, SchemeMode::CryptoBaseline, SchemeMode::BiometricBaseline];

    pub fn name(self) -> &'static str {
        match self {
            SchemeMode::UserBased => "user_based",
            SchemeMode::CryptoBaseline => "crypto_baseline",
            SchemeMode::BiometricBaseline => "biometric_baseline",
        }
    }
}

impl fmt::Display for SchemeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for SchemeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "user_based" | "userbased" => Ok(SchemeMode::UserBased),
            "crypto_baseline" | "cryptobaseline" => Ok(SchemeMode::CryptoBaseline),
            "biometric_baseline" | "biometricbaseline" => Ok(SchemeMode::BiometricBaseline),
            _ => Err(format!("unknown scheme mode '{s}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AttackStyle {
    /// Well-formed but unregistered authentication requests.
    Unauthenticated,
    /// Byte-identical copies of the most recently overheard sensor request.
    Replay,
    /// Alternates the two.
    Mixed,
}

impl FromStr for AttackStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unauthenticated" => Ok(AttackStyle::Unauthenticated),
            "replay" => Ok(AttackStyle::Replay),
            "mixed" => Ok(AttackStyle::Mixed),
            _ => Err(format!("unknown attack style '{s}'")),
        }
    }
}

/// Modelled cipher cost in simulated nanoseconds: base + per_byte × len,
/// scaled by the scheme's cost factor. Modelled rather than measured so a
/// run stays a pure function of its configuration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CipherCost {
    pub encrypt_base_ns: f64,
    pub encrypt_per_byte_ns: f64,
    pub decrypt_base_ns: f64,
    pub decrypt_per_byte_ns: f64,
}

impl Default for CipherCost {
    fn default() -> Self {
        CipherCost {
            encrypt_base_ns: 1000.0,
            encrypt_per_byte_ns: 3.5,
            decrypt_base_ns: 990.0,
            decrypt_per_byte_ns: 3.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub n_sensors: usize,
    pub n_access_points: usize,
    pub area_radius: f64,
    pub connection_radius: f64,
    pub min_spacing: f64,
    pub duration_s: f64,
    pub n_runs: usize,
    /// Readings per second per sensor.
    pub legit_rate: f64,
    pub payload_bytes: usize,
    pub sensor_energy: f64,
    pub auth_timeout_ms: u64,
    pub freshness_window_ms: u64,

    pub attacker_count: usize,
    pub attacker_rate_multiplier: f64,
    pub attack_style: AttackStyle,
    /// Insiders hold a valid gateway binding; outsiders do not.
    pub attacker_insider: bool,
    pub attacker_energy: f64,

    pub scheme_mode: SchemeMode,
    pub mitigation_on: bool,
    /// Overrides of the rate-derived admission policy defaults.
    pub dos_min_power: Option<f64>,
    pub dos_token_rate: Option<f64>,
    pub dos_bucket_capacity: Option<f64>,
    pub dos_per_packet_cost: Option<f64>,

    pub channel_loss_p: f64,
    pub channel_latency_ms: f64,

    pub gateway_forward_us: u64,
    pub server_process_us: u64,
    pub gateway_queue_capacity: usize,

    pub crypto_handshake_ms: f64,
    pub crypto_cost_factor: f64,
    pub biometric_enroll_ms: f64,
    pub biometric_cost_factor: f64,
    pub cipher_cost: CipherCost,

    pub curve: CurveId,
    pub rc4_drop: usize,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n_sensors: 100,
            n_access_points: 10,
            area_radius: 20.0,
            connection_radius: 1.0,
            min_spacing: 0.6,
            duration_s: 60.0,
            n_runs: 10,
            legit_rate: 1.0,
            payload_bytes: 32,
            sensor_energy: 1000.0,
            auth_timeout_ms: 1000,
            freshness_window_ms: 2000,
            attacker_count: 5,
            attacker_rate_multiplier: 100.0,
            attack_style: AttackStyle::Mixed,
            attacker_insider: true,
            attacker_energy: 1e6,
            scheme_mode: SchemeMode::UserBased,
            mitigation_on: true,
            dos_min_power: None,
            dos_token_rate: None,
            dos_bucket_capacity: None,
            dos_per_packet_cost: None,
            channel_loss_p: 0.01,
            channel_latency_ms: 2.0,
            gateway_forward_us: 2000,
            server_process_us: 3000,
            gateway_queue_capacity: 1024,
            crypto_handshake_ms: 150.0,
            crypto_cost_factor: 1.4,
            biometric_enroll_ms: 500.0,
            biometric_cost_factor: 1.8,
            cipher_cost: CipherCost::default(),
            curve: CurveId::Std256,
            rc4_drop: 0,
            seed: 1,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, SimError> {
    value.parse().map_err(|_| SimError::ConfigInvalid(format!("{key}: cannot parse '{value}'")))
}

pub fn parse_bool(key: &str, value: &str) -> Result<bool, SimError> {
    match value.to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(SimError::ConfigInvalid(format!("{key}: expected on/off, got '{value}'"))),
    }
}

impl ScenarioConfig {
    /// Applies one `key = value` setting. Returns `Ok(false)` for keys this
    /// type does not know, so callers can layer their own sections on top.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, SimError> {
        let map_err = |e: String| SimError::ConfigInvalid(format!("{key}: {e}"));
        match key {
            "sim.n_sensors" => self.n_sensors = parse(key, value)?,
            "sim.n_access_points" => self.n_access_points = parse(key, value)?,
            "sim.area_radius" => self.area_radius = parse(key, value)?,
            "sim.connection_radius" => self.connection_radius = parse(key, value)?,
            "sim.min_spacing" => self.min_spacing = parse(key, value)?,
            "sim.duration_s" => self.duration_s = parse(key, value)?,
            "sim.n_runs" => self.n_runs = parse(key, value)?,
            "sim.legit_rate" => self.legit_rate = parse(key, value)?,
            "sim.payload_bytes" => self.payload_bytes = parse(key, value)?,
            "sim.sensor_energy" => self.sensor_energy = parse(key, value)?,
            "sim.auth_timeout_ms" => self.auth_timeout_ms = parse(key, value)?,
            "sim.seed" => self.seed = parse(key, value)?,
            "sim.mode" => self.scheme_mode = value.parse().map_err(map_err)?,
            "sim.mitigation" => self.mitigation_on = parse_bool(key, value)?,
            "protocol.freshness_window_ms" => self.freshness_window_ms = parse(key, value)?,
            "attack.count" => self.attacker_count = parse(key, value)?,
            "attack.rate_multiplier" => self.attacker_rate_multiplier = parse(key, value)?,
            "attack.style" => self.attack_style = value.parse().map_err(map_err)?,
            "attack.insider" => self.attacker_insider = parse_bool(key, value)?,
            "attack.energy" => self.attacker_energy = parse(key, value)?,
            "dos.min_power" => self.dos_min_power = Some(parse(key, value)?),
            "dos.token_rate" => self.dos_token_rate = Some(parse(key, value)?),
            "dos.bucket_capacity" => self.dos_bucket_capacity = Some(parse(key, value)?),
            "dos.per_packet_cost" => self.dos_per_packet_cost = Some(parse(key, value)?),
            "channel.loss_p" => self.channel_loss_p = parse(key, value)?,
            "channel.latency_ms" => self.channel_latency_ms = parse(key, value)?,
            "gateway.forward_us" => self.gateway_forward_us = parse(key, value)?,
            "gateway.server_process_us" => self.server_process_us = parse(key, value)?,
            "gateway.queue_capacity" => self.gateway_queue_capacity = parse(key, value)?,
            "baseline.crypto_handshake_ms" => self.crypto_handshake_ms = parse(key, value)?,
            "baseline.crypto_cost_factor" => self.crypto_cost_factor = parse(key, value)?,
            "baseline.biometric_enroll_ms" => self.biometric_enroll_ms = parse(key, value)?,
            "baseline.biometric_cost_factor" => self.biometric_cost_factor = parse(key, value)?,
            "cost.encrypt_base_ns" => self.cipher_cost.encrypt_base_ns = parse(key, value)?,
            "cost.encrypt_per_byte_ns" => self.cipher_cost.encrypt_per_byte_ns = parse(key, value)?,
            "cost.decrypt_base_ns" => self.cipher_cost.decrypt_base_ns = parse(key, value)?,
            "cost.decrypt_per_byte_ns" => self.cipher_cost.decrypt_per_byte_ns = parse(key, value)?,
            "crypto.curve" => self.curve = value.parse().map_err(map_err)?,
            "crypto.rc4_drop" => self.rc4_drop = parse(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Parses a whole configuration text, rejecting unknown keys.
    pub fn from_text(text: &str) -> Result<Self, SimError> {
        let mut cfg = ScenarioConfig::default();
        for entry in parse_kv(text)? {
            if !cfg.set(&entry.key, &entry.value)? {
                return Err(SimError::ConfigInvalid(format!("line {}: unknown key '{}'", entry.line, entry.key)));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let fail = |msg: &str| Err(SimError::ConfigInvalid(msg.to_string()));
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if self.n_sensors == 0 {
            return fail("sim.n_sensors must be at least 1");
        }
        if self.n_access_points == 0 {
            return fail("sim.n_access_points must be at least 1");
        }
        if !positive(self.area_radius)
            || !positive(self.connection_radius)
            || self.min_spacing.is_nan()
            || self.min_spacing < 0.0
        {
            return fail("radii must be positive and min_spacing non-negative");
        }
        if self.min_spacing >= 2.0 * self.area_radius {
            return fail("sim.min_spacing must be below twice sim.area_radius");
        }
        if !positive(self.duration_s) || !positive(self.legit_rate) {
            return fail("sim.duration_s and sim.legit_rate must be positive");
        }
        if !(self.attacker_rate_multiplier >= 0.0 && self.attacker_rate_multiplier.is_finite()) {
            return fail("attack.rate_multiplier must be non-negative");
        }
        if !(0.0..1.0).contains(&self.channel_loss_p) {
            return fail("channel.loss_p must be in [0, 1)");
        }
        if !(self.channel_latency_ms >= 0.0 && self.channel_latency_ms.is_finite()) {
            return fail("channel.latency_ms must be non-negative");
        }
        if self.n_runs == 0 {
            return fail("sim.n_runs must be at least 1");
        }
        if self.gateway_queue_capacity == 0 || self.gateway_forward_us + self.server_process_us == 0 {
            return fail("gateway queue capacity and service time must be positive");
        }
        if self.payload_bytes == 0 || self.freshness_window_ms == 0 || self.auth_timeout_ms == 0 {
            return fail("payload, freshness window and auth timeout must be positive");
        }
        let factors = [self.crypto_cost_factor, self.biometric_cost_factor];
        if factors.iter().any(|f| !positive(*f)) || self.crypto_handshake_ms < 0.0 || self.biometric_enroll_ms < 0.0 {
            return fail("baseline factors must be positive and delays non-negative");
        }
        self.admission_policy().validate().map_err(|e| SimError::ConfigInvalid(e.to_string()))?;
        Ok(())
    }

    pub fn admission_policy(&self) -> AdmissionPolicy {
        let d = AdmissionPolicy::for_legit_rate(self.legit_rate);
        AdmissionPolicy {
            min_power: self.dos_min_power.unwrap_or(d.min_power),
            token_rate: self.dos_token_rate.unwrap_or(d.token_rate),
            bucket_capacity: self.dos_bucket_capacity.unwrap_or(d.bucket_capacity),
            per_packet_cost: self.dos_per_packet_cost.unwrap_or(d.per_packet_cost),
        }
    }

    /// Attack packets per second per attacker.
    pub fn attack_rate(&self) -> f64 {
        self.attacker_rate_multiplier * self.legit_rate
    }

    /// Cost multiplier on server work and cipher time for the scheme.
    pub fn cost_factor(&self) -> f64 {
        match self.scheme_mode {
            SchemeMode::UserBased => 1.0,
            SchemeMode::CryptoBaseline => self.crypto_cost_factor,
            SchemeMode::BiometricBaseline => self.biometric_cost_factor,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KvEntry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Splits `key = value` lines. Blank lines and lines starting with `#` are
/// skipped; a `#` after the value starts a comment.
pub fn parse_kv(text: &str) -> Result<Vec<KvEntry>, SimError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| SimError::ConfigInvalid(format!("line {}: expected 'key = value'", i + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(SimError::ConfigInvalid(format!("line {}: empty key", i + 1)));
        }
        out.push(KvEntry { key: key.to_string(), value: value.to_string(), line: i + 1 });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = ScenarioConfig::from_text("").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
        assert_eq!(cfg.n_sensors, 100);
        assert_eq!(cfg.area_radius, 20.0);
        assert_eq!(cfg.connection_radius, 1.0);
        assert_eq!(cfg.min_spacing, 0.6);
        assert_eq!(cfg.duration_s, 60.0);
        assert_eq!(cfg.n_runs, 10);
    }

    #[test]
    fn parses_sections_and_comments() {
        let text = "# scenario\nsim.n_sensors = 40\n\ndos.token_rate = 3.5  # per second\ncrypto.curve = toy17\nsim.mode = crypto_baseline\nsim.mitigation = off\n";
        let cfg = ScenarioConfig::from_text(text).unwrap();
        assert_eq!(cfg.n_sensors, 40);
        assert_eq!(cfg.admission_policy().token_rate, 3.5);
        assert_eq!(cfg.admission_policy().bucket_capacity, 4.0);
        assert_eq!(cfg.curve, CurveId::Toy17);
        assert_eq!(cfg.scheme_mode, SchemeMode::CryptoBaseline);
        assert!(!cfg.mitigation_on);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ScenarioConfig::from_text("sim.n_sensors").is_err());
        assert!(ScenarioConfig::from_text("sim.bogus = 1").is_err());
        assert!(ScenarioConfig::from_text("sim.n_sensors = many").is_err());
        assert!(ScenarioConfig::from_text("channel.loss_p = 1.0").is_err());
        assert!(ScenarioConfig::from_text("sim.min_spacing = 40").is_err());
        assert!(ScenarioConfig::from_text("sim.legit_rate = 0").is_err());
        assert!(ScenarioConfig::from_text("dos.min_power = -1").is_err());
    }
}
