//! Stationary solutions of the stochastic heat equation with
//! fluctuation-dissipation memory.
//!
//! The crate is organised along the pipeline: memory kernels
//! ([`cm_kernel`]), per-mode spectral densities ([`spectral`]), stationary
//! path samplers ([`sampler`]), field assembly over an eigenbasis
//! ([`field`]) and variogram-based Hölder exponent estimation
//! ([`regularity`]).

pub mod cm_kernel;
pub mod comparison;
pub mod error;
pub mod field;
pub mod quadrature;
pub mod regularity;
pub mod rng;
pub mod sampler;
pub mod spectral;

pub use error::{Error, Result};
