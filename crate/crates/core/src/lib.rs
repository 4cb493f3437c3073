//! User-based authentication and DoS mitigation for wearable body sensor
//! networks.
//!
//! The crate has two halves. The protocol library ([`crypto`], [`protocol`],
//! [`dos_filter`], [`storage`]) implements server initialization, sensor
//! registration, the authenticated key-agreement handshake, gateway
//! admission control and sealed record exchange. The [`simnet`] module runs
//! that library inside a deterministic discrete-event network simulator to
//! measure throughput, legitimate packet loss and cipher cost under
//! flooding attacks.

pub mod crypto;
pub mod dos_filter;
pub mod protocol;
pub mod simnet;
pub mod storage;
