//! Disparate impact auditing for binary decisions.
//!
//! The crate loads and encodes tabular data ([`dataset`]), trains baseline
//! scorers ([`models`]), measures disparate impact and error-rate ratios
//! ([`metrics`]) with asymptotic and bootstrap intervals ([`inference`]),
//! wraps classifiers with bias-mitigation strategies ([`mitigation`]) and runs
//! cross-validated experiments over all of them ([`harness`]).

pub mod dataset;
pub mod error;
pub mod harness;
pub mod inference;
pub mod metrics;
pub mod mitigation;
pub mod models;

pub use error::{Error, Result};
