//! Online Bayesian inference for state-space models with static parameters.
//!
//! The crate provides a bootstrap particle filter, an outer sequential
//! sampler over theta-particles with particle MCMC rejuvenation, a
//! fixed-window variant that bridges blocks through a kernel-density
//! approximation, exact Kalman references for the linear-Gaussian model and
//! exact finite-state flow computations used as validation oracles.

pub mod error;
pub mod fk_oracle;
pub mod kalman;
pub mod kde;
pub mod models;
pub mod particle;
pub mod rngstream;
pub mod smc2;
pub mod smc2fw;

pub use error::{Error, Result};
