//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Each exported function returns a flat `Float64Array`; the layout is
//! documented on the function. The plain-Rust versions in [`compute`] are
//! what the bindings call and what the tests exercise natively.

use wasm_bindgen::prelude::*;

pub mod compute;

fn js(e: qnn_stability::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Stability bound for a constant step against `T = 1 ..= t_max`, one
/// series per noise level in `noise_levels`. Layout: `log10 ε` for
/// `T = 1 ..= t_max`, series after series.
#[wasm_bindgen]
pub fn bound_curves(
    k: usize,
    m: usize,
    eta: f64,
    t_max: usize,
    noise_levels: &[f64],
) -> Result<Vec<f64>, JsError> {
    compute::bound_curves(k, m, eta, t_max, noise_levels).map_err(js)
}

/// Output `f(θ)` of a hardware-efficient ansatz with `θ_j` swept over
/// `[−π, π]` and the other angles drawn from `seed`. Layout: triples
/// `(θ_j, f, ∂f/∂θ_j)` for `points` angles.
#[wasm_bindgen]
pub fn output_landscape(
    qubits: usize,
    layers: usize,
    param: usize,
    noise: f64,
    seed: u64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    compute::output_landscape(qubits, layers, param, noise, seed, points).map_err(js)
}

/// Seed-averaged parameter distance of paired SGD runs on neighbouring
/// synthetic datasets, next to the worst-case envelope. Layout: pairs
/// `(mean δ_t, envelope_t)` for `t = 0 ..= steps`.
#[wasm_bindgen]
pub fn stability_trace(
    qubits: usize,
    layers: usize,
    m: usize,
    eta: f64,
    steps: usize,
    seeds: usize,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    compute::stability_trace(qubits, layers, m, eta, steps, seeds, seed).map_err(js)
}
