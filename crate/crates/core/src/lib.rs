//! Robust performance bounds for linear quantum stochastic systems.
//!
//! The crate builds physically realizable open quantum harmonic oscillator
//! models, certifies exponential decay of their two-point covariance, and
//! bounds the worst-case quadratic cost rate over relative-entropy balls of
//! system-field states.

pub mod bounds;
pub mod certificate;
pub mod config;
pub mod error;
pub mod matnum;
pub mod oqho;
pub mod oracle;
pub mod quad;

pub use bounds::{CurvePoint, RobustBound};
pub use certificate::{CertificateReport, DecayCertificate};
pub use config::Tolerances;
pub use error::{Error, Result};
pub use matnum::{ComplexMatrix, RealMatrix};
pub use oqho::{InvariantModel, OqhoParams, StateSpace};
pub use oracle::{SimConfig, SimReport};
