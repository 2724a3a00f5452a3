//! Command-line front end and replication harness for Bayesian principal
//! causal forests.
//!
//! The sampler itself lives in [`bpcf_core`]; this crate adds CSV
//! ingestion, the run-config format, posterior-draw files, run manifests
//! and the `bpcf` binary.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod output;

pub use config::{RunConfig, RunProfile};
pub use error::{Error, Result};
