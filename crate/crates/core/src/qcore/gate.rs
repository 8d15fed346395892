use num_complex::Complex64;

use super::{kernel, Statevector};
use crate::{Error, Result};

pub type Mat2 = [[Complex64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Where a rotation gets its angle from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Angle {
    /// Trainable: the angle is `theta[index]`.
    Param(usize),
    Fixed(f64),
}

/// One gate of a circuit. Rotations are `R_P(θ) = exp(-iθP/2)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    Rotation {
        axis: Axis,
        target: usize,
        angle: Angle,
    },
    Cnot {
        control: usize,
        target: usize,
    },
    /// Fixed single-qubit unitary.
    Unitary {
        target: usize,
        matrix: Mat2,
    },
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

pub(crate) fn rotation_matrix(axis: Axis, theta: f64) -> Mat2 {
    let (s, c) = (theta / 2.0).sin_cos();
    let c = Complex64::new(c, 0.0);
    match axis {
        Axis::X => {
            let mis = Complex64::new(0.0, -s);
            [[c, mis], [mis, c]]
        }
        Axis::Y => [[c, Complex64::new(-s, 0.0)], [Complex64::new(s, 0.0), c]],
        Axis::Z => [
            [Complex64::from_polar(1.0, -theta / 2.0), ZERO],
            [ZERO, Complex64::from_polar(1.0, theta / 2.0)],
        ],
    }
}

impl Gate {
    pub fn trainable(axis: Axis, target: usize, param: usize) -> Self {
        Gate::Rotation {
            axis,
            target,
            angle: Angle::Param(param),
        }
    }

    pub fn fixed_rotation(axis: Axis, target: usize, theta: f64) -> Self {
        Gate::Rotation {
            axis,
            target,
            angle: Angle::Fixed(theta),
        }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate::Cnot { control, target }
    }

    pub fn hadamard(target: usize) -> Self {
        let h = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Gate::Unitary {
            target,
            matrix: [[h, h], [h, -h]],
        }
    }

    pub fn param_index(&self) -> Option<usize> {
        match self {
            Gate::Rotation {
                angle: Angle::Param(i),
                ..
            } => Some(*i),
            _ => None,
        }
    }

    pub fn is_trainable(&self) -> bool {
        self.param_index().is_some()
    }

    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::Rotation { target, .. } | Gate::Unitary { target, .. } => vec![target],
            Gate::Cnot { control, target } => vec![control, target],
        }
    }

    /// Structural checks against a register of `n_qubits`.
    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        for q in self.qubits() {
            if q >= n_qubits {
                return Err(Error::config(format!(
                    "gate acts on qubit {q} but the register has {n_qubits}"
                )));
            }
        }
        match self {
            Gate::Cnot { control, target } if control == target => Err(Error::config(format!(
                "CNOT control and target are both qubit {control}"
            ))),
            Gate::Rotation {
                angle: Angle::Fixed(a),
                ..
            } if !a.is_finite() => Err(Error::config("fixed rotation angle is not finite")),
            Gate::Unitary { matrix, .. } if !is_unitary(matrix, 1e-10) => {
                Err(Error::config("fixed single-qubit matrix is not unitary"))
            }
            _ => Ok(()),
        }
    }

    /// Resolves the 2×2 matrix of a single-qubit gate given the trainable
    /// angle (if any). Returns `None` for CNOT.
    pub(crate) fn single_qubit_matrix(&self, angle: Option<f64>) -> Result<Option<(usize, Mat2)>> {
        match (self, angle) {
            (
                Gate::Rotation {
                    axis,
                    target,
                    angle: Angle::Param(_),
                },
                Some(theta),
            ) => Ok(Some((*target, rotation_matrix(*axis, theta)))),
            (
                Gate::Rotation {
                    angle: Angle::Param(i),
                    ..
                },
                None,
            ) => Err(Error::contract(format!(
                "trainable gate (parameter {i}) applied without an angle"
            ))),
            (
                Gate::Rotation {
                    axis,
                    target,
                    angle: Angle::Fixed(theta),
                },
                None,
            ) => Ok(Some((*target, rotation_matrix(*axis, *theta)))),
            (Gate::Unitary { target, matrix }, None) => Ok(Some((*target, *matrix))),
            (Gate::Cnot { .. }, None) => Ok(None),
            (_, Some(_)) => Err(Error::contract("angle supplied to a non-trainable gate")),
        }
    }

    /// Applies the gate to a raw amplitude buffer of `n_total` qubits.
    pub(crate) fn apply_raw(
        &self,
        amps: &mut [Complex64],
        n_total: usize,
        angle: Option<f64>,
    ) -> Result<()> {
        match self.single_qubit_matrix(angle)? {
            Some((q, m)) => kernel::apply_1q(amps, n_total, q, &m),
            None => {
                if let Gate::Cnot { control, target } = *self {
                    kernel::apply_cnot(amps, n_total, control, target);
                }
            }
        }
        Ok(())
    }
}

fn is_unitary(m: &Mat2, tol: f64) -> bool {
    for i in 0..2 {
        for j in 0..2 {
            let dot: Complex64 = (0..2).map(|k| m[k][i].conj() * m[k][j]).sum();
            let expect = if i == j { 1.0 } else { 0.0 };
            if (dot - expect).norm() > tol {
                return false;
            }
        }
    }
    true
}

/// Returns `U_gate|ψ⟩`. `angle` must be given exactly when the gate is
/// trainable.
pub fn apply_gate(state: &Statevector, gate: &Gate, angle: Option<f64>) -> Result<Statevector> {
    gate.validate(state.n_qubits())?;
    let mut out = state.clone();
    gate.apply_raw(out.amps_mut(), state.n_qubits(), angle)?;
    Ok(out)
}
