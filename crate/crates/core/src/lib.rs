//! Noise-robust ReLU networks for discretized inverse problems.
//!
//! The crate covers four explicit forward operators and their discretizations,
//! an exact ReLU network calculus with constructive approximators built on top
//! of it, and a from-scratch trainer for the noisy-measurement regression that
//! approximates the inverse maps.

pub mod discretize;
pub mod error;
pub mod forward;
pub mod quadrature;
pub mod constructive;
pub mod network;
pub mod rng;
pub mod sparse;
pub mod train;

pub use error::{Error, Result};
pub use network::{
    concat, full_parallelize, full_parallelize_all, identity_net, parallelize, parallelize_all,
    LayerWeights, NetMetrics, Network,
};
pub use sparse::SparseMatrix;
