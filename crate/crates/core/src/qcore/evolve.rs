use super::density::check_noise;
use super::{DensityMatrix, Statevector};
use crate::circuit::{Circuit, ParameterVector};
use crate::{Error, Result};

fn check_shapes(circuit: &Circuit, theta: &ParameterVector, n_qubits: usize) -> Result<()> {
    if theta.len() != circuit.n_params() {
        return Err(Error::contract(format!(
            "circuit has {} trainable gates but theta has {} entries",
            circuit.n_params(),
            theta.len()
        )));
    }
    if n_qubits != circuit.n_qubits() {
        return Err(Error::contract(format!(
            "circuit acts on {} qubits, state has {n_qubits}",
            circuit.n_qubits()
        )));
    }
    Ok(())
}

/// `U(θ)|ψ⟩`, gates applied in list order.
pub fn evolve(
    state: &Statevector,
    circuit: &Circuit,
    theta: &ParameterVector,
) -> Result<Statevector> {
    check_shapes(circuit, theta, state.n_qubits())?;
    let mut out = state.clone();
    let n = out.n_qubits();
    for gate in circuit.gates() {
        let angle = gate.param_index().map(|i| theta[i]);
        gate.apply_raw(out.amps_mut(), n, angle)?;
    }
    Ok(out)
}

/// Each gate as `ρ ← UρU†` followed by the global depolarizing channel
/// with level `p`, so `K_g` channel applications in total.
pub fn evolve_noisy(
    rho: &DensityMatrix,
    circuit: &Circuit,
    theta: &ParameterVector,
    p: f64,
) -> Result<DensityMatrix> {
    evolve_noisy_inspect(rho, circuit, theta, p, |_| Ok(()))
}

/// [`evolve_noisy`] with a callback after every gate-plus-channel step.
pub fn evolve_noisy_inspect<F>(
    rho: &DensityMatrix,
    circuit: &Circuit,
    theta: &ParameterVector,
    p: f64,
    mut inspect: F,
) -> Result<DensityMatrix>
where
    F: FnMut(&DensityMatrix) -> Result<()>,
{
    check_noise(p)?;
    check_shapes(circuit, theta, rho.n_qubits())?;
    let mut out = rho.clone();
    for gate in circuit.gates() {
        let angle = gate.param_index().map(|i| theta[i]);
        out.conjugate_by(gate, angle)?;
        out.depolarize_in_place(p);
        inspect(&out)?;
    }
    Ok(out)
}
