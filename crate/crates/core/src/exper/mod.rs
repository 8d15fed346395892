//! Experiment orchestration: paired-run stability measurement,
//! generalization-gap replicates and sweeps, and the inequality fuzz suite.
//!
//! Every replicate derives its own seed from the base seed and its replicate
//! id, so results do not depend on execution order or thread count.

mod gap;
mod stability;
pub mod stats;
mod sweep;
mod verify;

pub use gap::{gap_experiment, DataSource, GapConfig, GapRow, GapStats};
pub use stability::{paired_stability, PairedConfig, StabilityResult};
pub use sweep::{sweep, SweepKind, SweepResult};
pub use verify::{verify_suite, verify_suite_with, PropertyReport, VerifyOptions, VerifyReport};

/// Order-preserving map, parallel when the `parallel` feature is on.
pub(crate) fn par_map<T, R, F>(items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().map(f).collect()
    }
}
