use num_complex::Complex64;

use super::{kernel, Observable, QuantumState};
use crate::{Error, Result};

/// Largest register simulated as a dense state vector.
pub const MAX_STATE_QUBITS: usize = 12;

const NORM_TOL: f64 = 1e-10;

/// Pure state of `n` qubits: `2^n` unit-norm amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

pub(crate) fn check_qubits(n: usize, cap: usize, what: &str) -> Result<()> {
    if n == 0 || n > cap {
        return Err(Error::config(format!(
            "{what} supports 1..={cap} qubits, got {n}"
        )));
    }
    Ok(())
}

/// `|0…0⟩` on `n_qubits` qubits.
pub fn zero_state(n_qubits: usize) -> Result<Statevector> {
    Statevector::basis(n_qubits, 0)
}

impl Statevector {
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_qubits(n_qubits, MAX_STATE_QUBITS, "state vector")?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::config(format!(
                "basis index {index} out of range for {n_qubits} qubits"
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); dim];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amps })
    }

    /// Wraps explicit amplitudes; the length must be a power of two and the
    /// norm 1 within 1e-10.
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::config(format!(
                "amplitude length {len} is not 2^n with n ≥ 1"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        check_qubits(n_qubits, MAX_STATE_QUBITS, "state vector")?;
        let norm = kernel::norm_sqr(&amps).sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::config(format!("state norm is {norm}, expected 1")));
        }
        Ok(Self { n_qubits, amps })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub(crate) fn amps_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn norm(&self) -> f64 {
        kernel::norm_sqr(&self.amps).sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Statevector) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

impl QuantumState for Statevector {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    fn expectation(&self, obs: &Observable) -> Result<f64> {
        obs.check_qubits(self.n_qubits)?;
        Ok(obs.expectation_amplitudes(&self.amps))
    }
}
