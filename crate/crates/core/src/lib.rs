//! Exact simulation toolkit for iterative-QPE eigenstate preparation on a
//! single device and entanglement-assisted eigenstate broadcasting across
//! several devices, together with the closed-form suppression statistics and
//! the Monte Carlo machinery that validates them.

pub mod adiabatic;
pub mod analytics;
pub mod engine_eigen;
pub mod engine_statevector;
pub mod error;
pub mod harness;
pub mod spectral;

pub use error::{Error, Result};
