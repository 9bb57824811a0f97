//! Batch experiments on top of `fraclan`: configuration, seeded Monte Carlo
//! runs and CSV reports. The `fraclan` binary is a thin wrapper over
//! [`commands`].

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod report;

pub use error::{CliError, CliResult};
