//! Deterministic discrete-event simulation of a body sensor network under
//! flooding attack.
//!
//! A run is a pure function of its [`ScenarioConfig`] (seed included) and is
//! single-threaded; independent runs can go in parallel.

mod config;
mod engine;
mod metrics;
mod topology;

use thiserror::Error;

use crate::crypto::CryptoError;
use crate::protocol::ProtocolError;

pub use config::{parse_bool, parse_kv, AttackStyle, CipherCost, KvEntry, ScenarioConfig, SchemeMode};
pub use engine::{
    attacker_behavior, run_scenario, AttackSchedule, Body, EventKind, EventQueue, Packet, Payload, SimEvent,
};
pub use metrics::{aggregate, AggregateMetrics, LatencyStats, MetricsRecord, Summary};
pub use topology::{generate_topology, Point, Role, Topology, CLOUD_STORE, GATEWAY, MAX_PLACEMENT_ATTEMPTS, SERVER};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("could not place node {node} after {attempts} attempts")]
    PlacementFailure { node: usize, attempts: u32 },
    #[error("no records to aggregate")]
    EmptyInput,
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error("simulator fault: {0}")]
    Internal(String),
}
