//! Losses with certified Lipschitz (`α_ℓ`), smoothness (`ν_ℓ`) and
//! boundedness (`M`) constants.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    SquaredError,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    /// `α_ℓ`
    pub alpha: f64,
    /// `ν_ℓ`
    pub nu: f64,
    /// `M`
    pub bound: f64,
}

impl LossSpec {
    /// `(f − y)²` on `|f| ≤ ‖O‖`, `y = ±1`: the constants are exact,
    /// `α = 2(‖O‖+1)`, `ν = 2`, `M = (‖O‖+1)²`.
    pub fn squared_error(o_norm: f64) -> Result<Self> {
        if !(o_norm.is_finite() && o_norm >= 0.0) {
            return Err(Error::config(format!(
                "observable norm {o_norm} must be finite and ≥ 0"
            )));
        }
        Ok(Self {
            kind: LossKind::SquaredError,
            alpha: 2.0 * (o_norm + 1.0),
            nu: 2.0,
            bound: (o_norm + 1.0).powi(2),
        })
    }
}

pub fn loss_value(f: f64, y: f64, spec: &LossSpec) -> f64 {
    match spec.kind {
        LossKind::SquaredError => (f - y) * (f - y),
    }
}

/// `∂ℓ/∂f`.
pub fn loss_deriv(f: f64, y: f64, spec: &LossSpec) -> f64 {
    match spec.kind {
        LossKind::SquaredError => 2.0 * (f - y),
    }
}

/// `sign(f)` with the tie `f = 0` predicted as `+1`.
pub fn predict_label(f: f64) -> f64 {
    if f >= 0.0 {
        1.0
    } else {
        -1.0
    }
}
