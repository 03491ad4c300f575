//! Ambulance location and relocation models.
//!
//! The crate builds 0-1 models for static and multi-period ambulance location
//! with deterministic or reliability-weighted coverage, solves them exactly or
//! heuristically, sweeps the station budget to trace the coverage/stations
//! trade-off and runs the S1-S5 scenario ladder.

pub mod coverage;
pub mod error;
pub mod formulation;
pub mod instance;
pub mod pareto;
pub mod rational;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
