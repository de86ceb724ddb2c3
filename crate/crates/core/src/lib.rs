//! Scenario reduction for stochastic power-system studies.
//!
//! Classic reducers ([`reduce`]), the distance measures they are judged by
//! ([`metrics`]), and a convolutional surrogate ([`surrogate`]) that learns
//! to imitate the heuristic-search reducer and then reduces a scenario set
//! with a single forward pass.

pub mod csv_io;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod reduce;
pub mod scenario;
pub mod solar;
pub mod surrogate;

pub use error::{Error, Result};
pub use metrics::{combined_objective, moment_distance, space_distance, DistanceReport};
pub use reduce::{Method, ReductionConfig};
pub use scenario::{ImageGrid, NormalizationParams, ScenarioSet};
