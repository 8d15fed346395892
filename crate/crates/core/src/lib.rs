//! Quantum neural network simulation with SGD training, uniform-stability
//! bounds, and empirical generalization-gap experiments.
//!
//! Circuits are simulated exactly: pure states as statevectors, noisy runs
//! as density matrices with global depolarizing noise after each gate.

pub mod bounds;
pub mod circuit;
pub mod data;
pub mod error;
pub mod exper;
pub mod grad;
pub mod loss;
pub mod qcore;
pub mod report;
pub mod rng;
pub mod train;

pub use error::{Error, IngestError, Result};

/// Library version, recorded in run banners.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
