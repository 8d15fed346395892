//! Parameterised circuits, the hardware-efficient ansatz, angle encoding and
//! the QNN output map `f_θ(x) = Tr(O 𝒩(U(θ) ρ(x) U†(θ)))`.
//!
//! The encoding layer is not part of the circuit: `K_g` counts only the
//! gates of `U(θ)`, and depolarizing noise is applied only after those.

use std::ops::{Deref, Index};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::qcore::{
    evolve, evolve_noisy, zero_state, Axis, DensityMatrix, Gate, Observable, QuantumState,
    Statevector,
};
use crate::{Error, Result};

/// Cap for assembling full unitaries.
pub const MAX_UNITARY_QUBITS: usize = 6;

/// Ordered gate list with `K` trainable and `K_g` total gates.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
    n_params: usize,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > crate::qcore::MAX_STATE_QUBITS {
            return Err(Error::config(format!(
                "circuit width {n_qubits} out of range"
            )));
        }
        Ok(Self {
            n_qubits,
            gates: Vec::new(),
            n_params: 0,
        })
    }

    /// Builds a circuit from an explicit gate list. Trainable gates must use
    /// every index in `0..K` exactly once, in any order.
    pub fn from_gates(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        let mut c = Self::new(n_qubits)?;
        let mut seen = Vec::new();
        for g in &gates {
            g.validate(n_qubits)?;
            if let Some(i) = g.param_index() {
                seen.push(i);
            }
        }
        seen.sort_unstable();
        if seen.iter().enumerate().any(|(k, &i)| k != i) {
            return Err(Error::config(
                "trainable parameter indices must be exactly 0..K, each used once",
            ));
        }
        c.n_params = seen.len();
        c.gates = gates;
        Ok(c)
    }

    /// Appends a gate. A trainable gate must take the next free index.
    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        if let Some(i) = gate.param_index() {
            if i != self.n_params {
                return Err(Error::config(format!(
                    "next trainable gate must use parameter {}, got {i}",
                    self.n_params
                )));
            }
            self.n_params += 1;
        }
        self.gates.push(gate);
        Ok(())
    }

    /// Appends a trainable rotation and returns its parameter index.
    pub fn push_trainable(&mut self, axis: Axis, target: usize) -> Result<usize> {
        let idx = self.n_params;
        self.push(Gate::trainable(axis, target, idx))?;
        Ok(idx)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// `K`.
    pub fn n_params(&self) -> usize {
        self.n_params
    }

    /// `K_g`.
    pub fn n_gates(&self) -> usize {
        self.gates.len()
    }
}

/// Hardware-efficient ansatz: per layer a trainable RY then RZ on every
/// qubit, then a CNOT ladder `q → q+1`.
pub fn build_hea(n_qubits: usize, layers: usize) -> Result<Circuit> {
    if layers == 0 {
        return Err(Error::config("ansatz needs at least one layer"));
    }
    let mut c = Circuit::new(n_qubits)?;
    for _ in 0..layers {
        for q in 0..n_qubits {
            c.push_trainable(Axis::Y, q)?;
            c.push_trainable(Axis::Z, q)?;
        }
        for q in 0..n_qubits.saturating_sub(1) {
            c.push(Gate::cnot(q, q + 1))?;
        }
    }
    Ok(c)
}

/// Trainable angles `θ ∈ ℝ^K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(k: usize) -> Self {
        Self(vec![0.0; k])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Copy with `delta` added to component `j`.
    pub fn shifted(&self, j: usize, delta: f64) -> Self {
        let mut v = self.0.clone();
        v[j] += delta;
        Self(v)
    }

    pub fn distance(&self, other: &ParameterVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for ParameterVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ParameterVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Classical features already mapped to rotation angles in `[0, π]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedInput(Vec<f64>);

impl EncodedInput {
    pub fn new(features: Vec<f64>) -> Result<Self> {
        if let Some(bad) = features
            .iter()
            .find(|f| !(0.0..=std::f64::consts::PI).contains(*f))
        {
            return Err(Error::config(format!("feature {bad} outside [0, π]")));
        }
        Ok(Self(features))
    }

    pub fn features(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Angle encoding: `RY(x_j)` on qubit `j` of `|0…0⟩`.
pub fn encode(x: &EncodedInput, n_qubits: usize) -> Result<Statevector> {
    if x.len() != n_qubits {
        return Err(Error::contract(format!(
            "input has {} features but the register has {n_qubits} qubits",
            x.len()
        )));
    }
    let mut s = zero_state(n_qubits)?;
    for (q, &angle) in x.features().iter().enumerate() {
        Gate::fixed_rotation(Axis::Y, q, angle).apply_raw(s.amps_mut(), n_qubits, None)?;
    }
    Ok(s)
}

/// Full `2^n × 2^n` matrix of `U(θ)` (column `k` is `U(θ)|k⟩`).
pub fn assemble_unitary(circuit: &Circuit, theta: &ParameterVector) -> Result<DMatrix<Complex64>> {
    let n = circuit.n_qubits();
    if n > MAX_UNITARY_QUBITS {
        return Err(Error::config(format!(
            "unitary assembly supports up to {MAX_UNITARY_QUBITS} qubits, circuit has {n}"
        )));
    }
    let dim = 1usize << n;
    let mut u = DMatrix::<Complex64>::zeros(dim, dim);
    for k in 0..dim {
        let col = evolve(&Statevector::basis(n, k)?, circuit, theta)?;
        for (r, a) in col.amplitudes().iter().enumerate() {
            u[(r, k)] = *a;
        }
    }
    Ok(u)
}

/// `‖U(θ₁) − U(θ₂)‖`, the largest singular value of the difference.
pub fn spectral_distance(
    circuit: &Circuit,
    theta1: &ParameterVector,
    theta2: &ParameterVector,
) -> Result<f64> {
    let diff = assemble_unitary(circuit, theta1)? - assemble_unitary(circuit, theta2)?;
    Ok(diff.singular_values().iter().copied().fold(0.0, f64::max))
}

/// QNN output `f_θ(x)`. `p = 0` runs the state-vector path; `p > 0` evolves
/// the density matrix with a depolarizing channel after every gate.
pub fn qnn_forward(
    circuit: &Circuit,
    theta: &ParameterVector,
    x: &EncodedInput,
    obs: &Observable,
    p: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::config(format!("noise level p = {p} outside [0, 1]")));
    }
    let psi = encode(x, circuit.n_qubits())?;
    if p == 0.0 {
        evolve(&psi, circuit, theta)?.expectation(obs)
    } else {
        let rho = DensityMatrix::from_pure(&psi)?;
        evolve_noisy(&rho, circuit, theta, p)?.expectation(obs)
    }
}

impl Index<usize> for EncodedInput {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}
