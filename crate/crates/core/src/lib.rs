//! Simulation and covariance-component estimation for balanced nested
//! half-sib designs, with tools for studying the spectra of the estimates.

pub mod cli;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod spectra;
pub mod stats;

pub use error::{Error, Result};
