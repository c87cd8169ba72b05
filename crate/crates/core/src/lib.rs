//! Decentralized stochastic optimization on the Stiefel manifold.
//!
//! The crate provides the DPRSRM solver (clipped hybrid-momentum estimator,
//! gradient tracking and projection-based consensus), the DRSGD and DPRGD
//! baselines, a deterministic network simulator, PCA and low-rank matrix
//! completion problems, and an experiment harness.

pub mod error;
pub mod harness;
pub mod linalg;
pub mod manifold;
pub mod metrics;
pub mod network;
pub mod problems;
pub mod rng;
pub mod solvers;

pub use error::{Error, Result};
