//! Scenario runner, cipher benchmark and handshake walkthrough behind the
//! `wbsn` binary.

pub mod bench;
pub mod demo;
pub mod matrix;
pub mod simulate;

use std::io;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("simulation error: {0}")]
    Simulation(String),
    #[error("handshake demo failed: {0}")]
    Demo(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl CliError {
    /// 0 success, 1 demo failure, 2 configuration error, 3 simulation or
    /// output error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Demo(_) => 1,
            CliError::Config(_) => 2,
            CliError::Simulation(_) | CliError::Io(_) => 3,
        }
    }
}

impl From<wbsn_core::simnet::SimError> for CliError {
    fn from(e: wbsn_core::simnet::SimError) -> Self {
        match e {
            wbsn_core::simnet::SimError::ConfigInvalid(msg) => CliError::Config(msg),
            other => CliError::Simulation(other.to_string()),
        }
    }
}
