//! Blowfish privacy for linear counting queries.
//!
//! A policy graph says which pairs of domain values an adversary must not
//! tell apart. Multiplying a workload by the graph's incidence matrix turns
//! the problem into an ordinary differential-privacy instance over edges,
//! where standard strategies (Laplace, hierarchical, wavelet) apply. This
//! crate builds those transforms, runs the range-query mechanisms built on
//! them, and measures their error.

pub mod error;
pub mod evaluation;
pub mod graph;
pub mod linalg;
pub mod mechanism;
pub mod transform;
pub mod workload;

pub use error::{Error, Result};
