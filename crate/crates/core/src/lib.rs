//! Bayesian principal causal forests.
//!
//! Two coupled Bayesian causal forest (BCF) models, one for a continuous
//! intermediate `M` and one for an outcome `Y` conditional on the pair of
//! potential intermediates, are fit jointly by Metropolis-within-Gibbs
//! backfitting. The latent potential intermediate of every unit is imputed
//! inside the chain, so each kept draw carries a full set of potential
//! values `(M(0), M(1), Y(0), Y(1))` from which principal causal effects over
//! strata of `M(1) - M(0)` are computed.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the CLI and the
//! replication harness live in the companion `bpcf` crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bcf;
pub mod config;
pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod estimands;
pub mod forest;
pub mod matrix;
pub mod propensity;
pub mod simgen;
pub mod slice;
pub mod special;
pub mod tree;

mod text;

pub use config::{BpcfConfig, ImputeOrder, ModifierMode, ModifierScale, Profile};
pub use engine::{Dataset, PosteriorDraws};
pub use error::{Error, Result};
pub use matrix::Matrix;
