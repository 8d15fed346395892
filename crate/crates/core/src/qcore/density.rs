use nalgebra::DMatrix;
use num_complex::Complex64;

use super::state::check_qubits;
use super::{kernel, Gate, Observable, QuantumState, Statevector};
use crate::{Error, Result};

/// Largest register simulated as a dense density matrix.
pub const MAX_DENSITY_QUBITS: usize = 8;

/// Mixed state of `n` qubits, stored row-major as a `2^n × 2^n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    entries: Vec<Complex64>,
}

impl DensityMatrix {
    /// `|ψ⟩⟨ψ|`.
    pub fn from_pure(psi: &Statevector) -> Result<Self> {
        check_qubits(psi.n_qubits(), MAX_DENSITY_QUBITS, "density matrix")?;
        let a = psi.amplitudes();
        let dim = a.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(a[i] * a[j].conj());
            }
        }
        Ok(Self {
            n_qubits: psi.n_qubits(),
            entries,
        })
    }

    /// `I / 2^n`.
    pub fn maximally_mixed(n_qubits: usize) -> Result<Self> {
        check_qubits(n_qubits, MAX_DENSITY_QUBITS, "density matrix")?;
        let dim = 1usize << n_qubits;
        let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
        let w = 1.0 / dim as f64;
        for i in 0..dim {
            entries[i * dim + i] = Complex64::new(w, 0.0);
        }
        Ok(Self { n_qubits, entries })
    }

    /// Wraps explicit row-major entries after checking the Hermitian,
    /// unit-trace and PSD invariants.
    pub fn from_entries(n_qubits: usize, entries: Vec<Complex64>) -> Result<Self> {
        check_qubits(n_qubits, MAX_DENSITY_QUBITS, "density matrix")?;
        let dim = 1usize << n_qubits;
        if entries.len() != dim * dim {
            return Err(Error::config(format!(
                "expected {} entries, got {}",
                dim * dim,
                entries.len()
            )));
        }
        let rho = Self { n_qubits, entries };
        rho.check_invariants(1e-10)?;
        Ok(rho)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1usize << self.n_qubits
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim() + col]
    }

    pub fn trace(&self) -> Complex64 {
        let dim = self.dim();
        (0..dim).map(|i| self.entries[i * dim + i]).sum()
    }

    /// Largest `|ρ_ij − conj(ρ_ji)|`.
    pub fn hermiticity_error(&self) -> f64 {
        let dim = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..dim {
            for j in i..dim {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let dim = self.dim();
        // symmetrise so round-off asymmetry cannot upset the Hermitian solver
        let m = DMatrix::from_fn(dim, dim, |i, j| {
            (self.get(i, j) + self.get(j, i).conj()) * 0.5
        });
        m.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Hermitian and trace-one within `tol`; eigenvalues ≥ −1e-9.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > tol {
            return Err(Error::contract(format!(
                "density matrix not Hermitian (error {herm:e})"
            )));
        }
        let tr = self.trace();
        if (tr - 1.0).norm() > tol {
            return Err(Error::contract(format!("density matrix trace is {tr}")));
        }
        let min_eig = self.min_eigenvalue();
        if min_eig < -1e-9 {
            return Err(Error::contract(format!(
                "density matrix has eigenvalue {min_eig:e}"
            )));
        }
        Ok(())
    }

    /// Largest entrywise modulus difference.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `ρ ← GρG†` in place.
    pub(crate) fn conjugate_by(&mut self, gate: &Gate, angle: Option<f64>) -> Result<()> {
        let n = self.n_qubits;
        match gate.single_qubit_matrix(angle)? {
            Some((q, m)) => {
                kernel::apply_1q(&mut self.entries, 2 * n, q, &m);
                kernel::apply_1q(&mut self.entries, 2 * n, n + q, &kernel::conj2(&m));
            }
            None => {
                if let Gate::Cnot { control, target } = *gate {
                    // CNOT is real, so conj(CNOT) = CNOT on the column bits
                    kernel::apply_cnot(&mut self.entries, 2 * n, control, target);
                    kernel::apply_cnot(&mut self.entries, 2 * n, n + control, n + target);
                }
            }
        }
        Ok(())
    }

    /// `ρ ← (1−p)ρ + p·I/2^n` in place; `p` must already be validated.
    pub(crate) fn depolarize_in_place(&mut self, p: f64) {
        let dim = self.dim();
        let keep = 1.0 - p;
        for e in &mut self.entries {
            *e *= keep;
        }
        let add = p / dim as f64;
        for i in 0..dim {
            self.entries[i * dim + i] += add;
        }
    }
}

pub(crate) fn check_noise(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::config(format!("noise level p = {p} outside [0, 1]")));
    }
    Ok(())
}

/// Global depolarizing channel `(1−p)ρ + p·I/2^n`.
pub fn depolarize(rho: &DensityMatrix, p: f64) -> Result<DensityMatrix> {
    check_noise(p)?;
    let mut out = rho.clone();
    out.depolarize_in_place(p);
    Ok(out)
}

impl QuantumState for DensityMatrix {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    fn expectation(&self, obs: &Observable) -> Result<f64> {
        obs.check_qubits(self.n_qubits)?;
        Ok(obs.expectation_density(&self.entries, self.dim()))
    }
}
