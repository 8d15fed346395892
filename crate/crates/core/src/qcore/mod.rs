//! Dense state-vector and density-matrix simulation.
//!
//! Basis ordering is big-endian: qubit 0 is the most significant bit of a
//! basis index, so `|10⟩` (qubit 0 set) is index 2 of a two-qubit register.

mod density;
mod evolve;
mod gate;
pub(crate) mod kernel;
mod observable;
mod state;

pub use density::{depolarize, DensityMatrix, MAX_DENSITY_QUBITS};
pub use evolve::{evolve, evolve_noisy, evolve_noisy_inspect};
pub use gate::{apply_gate, Angle, Axis, Gate, Mat2};
pub use observable::{Observable, Pauli, PauliString};
pub use state::{zero_state, Statevector, MAX_STATE_QUBITS};

use crate::Result;

/// Anything an observable can be measured on.
pub trait QuantumState {
    fn n_qubits(&self) -> usize;
    fn expectation(&self, obs: &Observable) -> Result<f64>;
}

/// `Tr(O ρ)` for a density matrix, `⟨ψ|O|ψ⟩` for a pure state.
pub fn expectation<S: QuantumState + ?Sized>(state: &S, obs: &Observable) -> Result<f64> {
    state.expectation(obs)
}
