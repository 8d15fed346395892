//! Parameter-shift gradients and a central-difference oracle.

use std::f64::consts::FRAC_PI_2;

use crate::circuit::{qnn_forward, Circuit, EncodedInput, ParameterVector};
use crate::loss::{loss_deriv, LossSpec};
use crate::qcore::Observable;
use crate::{Error, Result};

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// `∂f/∂θ_j = (f(θ + π/2·e_j) − f(θ − π/2·e_j)) / 2`, exact because every
/// parameter drives exactly one Pauli rotation. `2K` forward passes at the
/// same noise level.
pub fn param_shift_grad(
    circuit: &Circuit,
    theta: &ParameterVector,
    x: &EncodedInput,
    obs: &Observable,
    p: f64,
) -> Result<Vec<f64>> {
    check_len(circuit, theta)?;
    (0..theta.len())
        .map(|j| {
            let plus = qnn_forward(circuit, &theta.shifted(j, FRAC_PI_2), x, obs, p)?;
            let minus = qnn_forward(circuit, &theta.shifted(j, -FRAC_PI_2), x, obs, p)?;
            Ok((plus - minus) / 2.0)
        })
        .collect()
}

/// `(f(θ + h·e_j) − f(θ − h·e_j)) / 2h`.
pub fn finite_diff_grad(
    circuit: &Circuit,
    theta: &ParameterVector,
    x: &EncodedInput,
    obs: &Observable,
    p: f64,
    h: f64,
) -> Result<Vec<f64>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::config(format!(
            "finite-difference step {h} must be positive"
        )));
    }
    check_len(circuit, theta)?;
    (0..theta.len())
        .map(|j| {
            let plus = qnn_forward(circuit, &theta.shifted(j, h), x, obs, p)?;
            let minus = qnn_forward(circuit, &theta.shifted(j, -h), x, obs, p)?;
            Ok((plus - minus) / (2.0 * h))
        })
        .collect()
}

/// `∇_θ ℓ(f_θ(x); y) = ℓ'(f) · ∇_θ f`.
pub fn loss_grad(
    circuit: &Circuit,
    theta: &ParameterVector,
    x: &EncodedInput,
    y: f64,
    obs: &Observable,
    p: f64,
    spec: &LossSpec,
) -> Result<Vec<f64>> {
    Ok(loss_value_and_grad(circuit, theta, x, y, obs, p, spec)?.1)
}

/// Output, loss gradient pair; `2K + 1` forward passes.
pub(crate) fn loss_value_and_grad(
    circuit: &Circuit,
    theta: &ParameterVector,
    x: &EncodedInput,
    y: f64,
    obs: &Observable,
    p: f64,
    spec: &LossSpec,
) -> Result<(f64, Vec<f64>)> {
    let f = qnn_forward(circuit, theta, x, obs, p)?;
    let d = loss_deriv(f, y, spec);
    let mut g = param_shift_grad(circuit, theta, x, obs, p)?;
    for v in &mut g {
        *v *= d;
    }
    Ok((f, g))
}

fn check_len(circuit: &Circuit, theta: &ParameterVector) -> Result<()> {
    if theta.len() != circuit.n_params() {
        return Err(Error::contract(format!(
            "circuit has {} parameters, theta has {}",
            circuit.n_params(),
            theta.len()
        )));
    }
    Ok(())
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}
