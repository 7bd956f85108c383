//! Configuration-driven runner for the qsoliton simulations: propagation
//! with per-snapshot photon statistics, optimized-filter sweeps, oracle
//! validation and classical reference runs.

pub mod analyze;
pub mod classical;
pub mod cli;
pub mod config;
pub mod error;
pub mod format;
pub mod manifest;
pub mod oracle;
pub mod simulate;

pub use config::RunConfig;
pub use error::{CliError, Result};
pub use manifest::Manifest;
