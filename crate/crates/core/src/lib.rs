//! Numerical laboratory for the one-dimensional stochastic heat equation driven by
//! space-time white noise: flat initial data with a general coefficient, and the
//! parabolic Anderson model started from a Dirac mass.

pub mod appendix_verifier;
pub mod ensemble;
pub mod ensemble_stats;
pub mod error;
pub mod kernel_core;
pub mod malliavin_probe;
pub mod noise_field;
pub mod quadrature;
pub mod spde_engine;

pub use error::{Error, Result};
