//! Particle-based Bayesian sampling: SGLD, SVGD, SPOS and variance-reduced
//! SPOS samplers over decomposable potentials, with diagnostics.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod kernel;
pub mod output;
pub mod rng;
pub mod samplers;
pub mod target;
pub mod validation;
pub mod variance_reduction;

pub use error::{Result, SamplerError};
