//! Block online EM for hidden Markov models.
//!
//! The crate provides three model families (linear-Gaussian, finite-state
//! with Gaussian emissions, stochastic volatility), exact and Monte Carlo
//! smoothing backends for their block sufficient statistics, the block online
//! EM driver with its averaged variant and an online EM baseline, likelihood
//! diagnostics, and a reproducible Monte Carlo experiment harness.

pub mod diagnostics;
pub mod engine;
pub mod error;
pub mod exact;
pub mod experiment;
pub mod kalman;
pub mod model;
pub mod particle;
pub mod rng;
pub mod simulate;

pub use error::{Error, Result};
