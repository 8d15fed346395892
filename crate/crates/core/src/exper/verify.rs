//! Randomized checks of every inequality and identity the bounds rely on.
//!
//! Each property draws `cases` independent random instances (circuits on up
//! to four qubits with at most twelve gates, parameters, inputs, Pauli
//! observables, noise levels) and records the smallest slack
//! `rhs − lhs` (or `tolerance − error` for identities). A case is a
//! violation when its slack is below `−1e-12`.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::par_map;
use crate::bounds::{kappa_from, noise_factor};
use crate::circuit::{qnn_forward, spectral_distance, Circuit, EncodedInput, ParameterVector};
use crate::grad::{finite_diff_grad, l2_distance, l2_norm, loss_grad, param_shift_grad, FD_STEP};
use crate::loss::{loss_deriv, loss_value, LossSpec};
use crate::qcore::{
    apply_gate, depolarize, evolve_noisy, evolve_noisy_inspect, Axis, DensityMatrix, Gate,
    Observable, Pauli, PauliString, QuantumState, Statevector,
};
use crate::report::Table;
use crate::rng::{derive_seed, stream, STREAM_FUZZ};
use crate::train::{gradient_variance, Dataset, Example};
use crate::Result;

const VIOLATION: f64 = -1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    pub seed: u64,
    pub cases: usize,
    /// Multiplier on `κ` in the smoothness checks. Values below 1 weaken the
    /// certified constant and serve as a negative control.
    pub kappa_scale: f64,
}

impl VerifyOptions {
    pub fn new(seed: u64, cases: usize) -> Self {
        Self {
            seed,
            cases,
            kappa_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub name: String,
    pub statement: String,
    pub cases: usize,
    pub violations: usize,
    pub worst_slack: f64,
    pub first_failure: Option<String>,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub cases: usize,
    pub kappa_scale: f64,
    pub properties: Vec<PropertyReport>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(PropertyReport::passed)
    }

    pub fn property(&self, name: &str) -> Option<&PropertyReport> {
        self.properties.iter().find(|p| p.name == name)
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new([
            "property",
            "cases",
            "violations",
            "worst_slack",
            "status",
            "statement",
        ]);
        for p in &self.properties {
            t.push(vec![
                p.name.as_str().into(),
                p.cases.into(),
                p.violations.into(),
                p.worst_slack.into(),
                if p.passed() { "pass" } else { "FAIL" }.into(),
                p.statement.as_str().into(),
            ])
            .expect("row matches header");
        }
        t
    }
}

struct Ctx {
    loss: LossSpec,
    kappa_scale: f64,
}

type Check = fn(&mut ChaCha8Rng, &Ctx) -> Result<f64>;

const PROPERTIES: &[(&str, &str, Check)] = &[
    ("gate_unitarity", "‖Gψ‖₂ = 1 within 1e-12", gate_unitarity),
    (
        "channel_composition",
        "per-gate depolarizing = (1−p̃)UρU† + p̃I/2^N, p̃ = 1−(1−p)^{K_g}, within 1e-10",
        channel_composition,
    ),
    (
        "density_invariants",
        "ρ Hermitian, trace 1, PSD after every noisy gate",
        density_invariants,
    ),
    (
        "pure_vs_density",
        "⟨ψ|O|ψ⟩ = Tr(O|ψ⟩⟨ψ|) within 1e-12",
        pure_vs_density,
    ),
    (
        "unitary_distance",
        "‖U(θ₁)−U(θ₂)‖ ≤ Σ|2 sin(Δθ_k/4)| ≤ (√K/2)‖Δθ‖₂",
        unitary_distance,
    ),
    (
        "output_lipschitz",
        "|f(θ₁)−f(θ₂)| ≤ √K‖O‖‖Δθ‖₂",
        output_lipschitz,
    ),
    (
        "output_lipschitz_noisy",
        "|f_p(θ₁)−f_p(θ₂)| ≤ (1−p)^{K_g}√K‖O‖‖Δθ‖₂",
        output_lipschitz_noisy,
    ),
    (
        "noisy_output_closed_form",
        "f_p = (1−p)^{K_g}f + (1−(1−p)^{K_g})Tr(O)/2^N within 1e-10",
        noisy_output_closed_form,
    ),
    ("output_range", "|f_p(θ)| ≤ ‖O‖", output_range),
    (
        "loss_certificates",
        "0 ≤ ℓ ≤ M, ℓ α-Lipschitz, ℓ' ν-Lipschitz on |f| ≤ ‖O‖",
        loss_certificates,
    ),
    (
        "shift_vs_finite_difference",
        "|shift − central difference| ≤ 1e-6",
        shift_vs_fd,
    ),
    (
        "output_gradient_bounds",
        "|∂_j f_p| ≤ √2(1−p)^{K_g}‖O‖ and ‖∇f_p‖₂ ≤ (1−p)^{K_g}√(2K)‖O‖",
        output_gradient_bounds,
    ),
    (
        "loss_gradient_norm",
        "‖∇ℓ‖₂ ≤ √2(1−p)^{K_g}α√K‖O‖",
        loss_gradient_norm,
    ),
    (
        "gradient_same_sample",
        "‖∇ℓ(θ₁;z)−∇ℓ(θ₂;z)‖₂ ≤ κ‖Δθ‖₂",
        gradient_same_sample,
    ),
    (
        "gradient_same_sample_noisy",
        "‖∇ℓ_p(θ₁;z)−∇ℓ_p(θ₂;z)‖₂ ≤ (1−p)^{K_g}κ‖Δθ‖₂",
        gradient_same_sample_noisy,
    ),
    (
        "gradient_different_sample",
        "‖∇ℓ(θ₁;z)−∇ℓ(θ₂;z′)‖₂ ≤ 2√2α√K‖O‖",
        gradient_different_sample,
    ),
    (
        "gradient_different_sample_noisy",
        "‖∇ℓ_p(θ₁;z)−∇ℓ_p(θ₂;z′)‖₂ ≤ 2√2(1−p)^{K_g}α√K‖O‖",
        gradient_different_sample_noisy,
    ),
    (
        "descent_lemma",
        "ℓ(θ₁)−ℓ(θ₂) ≤ ⟨∇ℓ(θ₂),θ₁−θ₂⟩ + (κ/2)‖θ₁−θ₂‖₂²",
        descent_lemma,
    ),
    (
        "gradient_variance_cap",
        "σ̂² ≤ G² = 2α²K‖O‖²",
        gradient_variance_cap,
    ),
];

pub fn verify_suite(seed: u64, cases: usize) -> VerifyReport {
    verify_suite_with(&VerifyOptions::new(seed, cases))
}

pub fn verify_suite_with(opts: &VerifyOptions) -> VerifyReport {
    let ctx = Ctx {
        loss: LossSpec::squared_error(1.0).expect("unit norm is valid"),
        kappa_scale: opts.kappa_scale,
    };
    let properties = PROPERTIES
        .iter()
        .enumerate()
        .map(|(pi, &(name, statement, check))| {
            let prop_seed = derive_seed(opts.seed, pi as u64);
            let outcomes = par_map((0..opts.cases).collect(), |c| {
                let mut rng = stream(derive_seed(prop_seed, c as u64), STREAM_FUZZ);
                check(&mut rng, &ctx)
            });
            let mut rep = PropertyReport {
                name: name.into(),
                statement: statement.into(),
                cases: opts.cases,
                violations: 0,
                worst_slack: f64::INFINITY,
                first_failure: None,
            };
            for (c, out) in outcomes.into_iter().enumerate() {
                let (slack, msg) = match out {
                    Ok(s) if s.is_nan() => (f64::NEG_INFINITY, "slack is NaN".to_string()),
                    Ok(s) => (s, format!("slack {s:e}")),
                    Err(e) => (f64::NEG_INFINITY, e.to_string()),
                };
                rep.worst_slack = rep.worst_slack.min(slack);
                if slack < VIOLATION {
                    rep.violations += 1;
                    rep.first_failure
                        .get_or_insert_with(|| format!("case {c}: {msg}"));
                }
            }
            rep
        })
        .collect();
    VerifyReport {
        seed: opts.seed,
        cases: opts.cases,
        kappa_scale: opts.kappa_scale,
        properties,
    }
}

// ---- random instances ----

fn axis(rng: &mut ChaCha8Rng) -> Axis {
    [Axis::X, Axis::Y, Axis::Z][rng.random_range(0..3)]
}

/// Circuit on 1–4 qubits with 1–12 gates, at least one of them trainable.
fn random_circuit(rng: &mut ChaCha8Rng) -> Result<Circuit> {
    let n = rng.random_range(1..=4);
    random_circuit_on(rng, n)
}

fn random_circuit_on(rng: &mut ChaCha8Rng, n: usize) -> Result<Circuit> {
    let n_gates = rng.random_range(1..=12);
    let mut c = Circuit::new(n)?;
    for g in 0..n_gates {
        let target = rng.random_range(0..n);
        let roll: f64 = rng.random();
        if g == 0 || roll < 0.55 {
            c.push_trainable(axis(rng), target)?;
        } else if roll < 0.8 && n > 1 {
            let mut control = rng.random_range(0..n - 1);
            if control >= target {
                control += 1;
            }
            c.push(Gate::cnot(control, target))?;
        } else if roll < 0.9 {
            c.push(Gate::fixed_rotation(
                axis(rng),
                target,
                rng.random_range(-PI..PI),
            ))?;
        } else {
            c.push(Gate::hadamard(target))?;
        }
    }
    Ok(c)
}

fn random_theta(rng: &mut ChaCha8Rng, k: usize) -> ParameterVector {
    ParameterVector::new((0..k).map(|_| rng.random_range(-PI..PI)).collect())
}

/// A second point either independent of `theta` or a perturbation of it at a
/// random scale between 1e-4 and 1.
fn second_theta(rng: &mut ChaCha8Rng, theta: &ParameterVector) -> ParameterVector {
    if rng.random::<bool>() {
        random_theta(rng, theta.len())
    } else {
        let scale = 10f64.powf(rng.random_range(-4.0..0.0));
        ParameterVector::new(
            theta
                .iter()
                .map(|t| t + scale * rng.random_range(-1.0..1.0))
                .collect(),
        )
    }
}

fn random_input(rng: &mut ChaCha8Rng, n: usize) -> EncodedInput {
    EncodedInput::new((0..n).map(|_| rng.random_range(0.0..=PI)).collect()).expect("in range")
}

fn random_label(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// Non-identity Pauli string with coefficient ±1, so `‖O‖ = 1`.
fn random_pauli_obs(rng: &mut ChaCha8Rng, n: usize) -> Result<Observable> {
    let letters = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    let mut s: Vec<Pauli> = (0..n).map(|_| letters[rng.random_range(0..4)]).collect();
    if s.iter().all(|p| *p == Pauli::I) {
        s[rng.random_range(0..n)] = letters[rng.random_range(1..4)];
    }
    Observable::new(n, vec![(random_label(rng), PauliString::new(s))])
}

fn random_noise(rng: &mut ChaCha8Rng) -> f64 {
    [0.01, 0.1, 0.3][rng.random_range(0..3)]
}

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> Result<Statevector> {
    let mut amps: Vec<Complex64> = (0..1usize << n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|a| *a /= norm);
    Statevector::from_amplitudes(amps)
}

struct Instance {
    circuit: Circuit,
    theta1: ParameterVector,
    theta2: ParameterVector,
    x: EncodedInput,
    y: f64,
    obs: Observable,
}

fn instance(rng: &mut ChaCha8Rng) -> Result<Instance> {
    let circuit = random_circuit(rng)?;
    let n = circuit.n_qubits();
    let theta1 = random_theta(rng, circuit.n_params());
    let theta2 = second_theta(rng, &theta1);
    let x = random_input(rng, n);
    let y = random_label(rng);
    let obs = random_pauli_obs(rng, n)?;
    Ok(Instance {
        circuit,
        theta1,
        theta2,
        x,
        y,
        obs,
    })
}

fn sqrt_k(c: &Circuit) -> f64 {
    (c.n_params() as f64).sqrt()
}

fn kappa_of(ctx: &Ctx, c: &Circuit, obs: &Observable) -> f64 {
    ctx.kappa_scale
        * kappa_from(
            ctx.loss.alpha,
            ctx.loss.nu,
            c.n_params(),
            obs.spectral_norm(),
        )
}

// ---- properties ----

fn gate_unitarity(rng: &mut ChaCha8Rng, _: &Ctx) -> Result<f64> {
    let n = rng.random_range(1..=4);
    let psi = random_state(rng, n)?;
    let c = random_circuit_on(rng, n)?;
    let g = &c.gates()[rng.random_range(0..c.n_gates())];
    let angle = g.param_index().map(|_| rng.random_range(-PI..PI));
    let out = apply_gate(&psi, g, angle)?;
    Ok(1e-12 - (out.norm() - 1.0).abs())
}

fn channel_composition(rng: &mut ChaCha8Rng, _: &Ctx) -> Result<f64> {
    let c = random_circuit(rng)?;
    let n = c.n_qubits();
    let theta = random_theta(rng, c.n_params());
    let p = random_noise(rng);
    let rho = DensityMatrix::from_pure(&random_state(rng, n)?)?;
    let per_gate = evolve_noisy(&rho, &c, &theta, p)?;
    let clean = evolve_noisy(&rho, &c, &theta, 0.0)?;
    let p_total = 1.0 - noise_factor(p, c.n_gates());
    let closed = depolarize(&clean, p_total)?;
    Ok(1e-10 - per_gate.max_abs_diff(&closed))
}

fn density_invariants(rng: &mut ChaCha8Rng, _: &Ctx) -> Result<f64> {
    let c = random_circuit(rng)?;
    let theta = random_theta(rng, c.n_params());
    let p = random_noise(rng);
    let rho = DensityMatrix::from_pure(&random_state(rng, c.n_qubits())?)?;
    let mut worst = f64::INFINITY;
    evolve_noisy_inspect(&rho, &c, &theta, p, |r| {
        let herm = 1e-10 - r.hermiticity_error();
        let tr = 1e-10 - (r.trace() - Complex64::new(1.0, 0.0)).norm();
        let psd = r.min_eigenvalue() + 1e-9;
        worst = worst.min(herm).min(tr).min(psd);
        Ok(())
    })?;
    Ok(worst)
}

fn pure_vs_density(rng: &mut ChaCha8Rng, _: &Ctx) -> Result<f64> {
    let n = rng.random_range(1..=4);
    let psi = random_state(rng, n)?;
    let obs = random_pauli_obs(rng, n)?;
    let a = psi.expectation(&obs)?;
    let b = DensityMatrix::from_pure(&psi)?.expectation(&obs)?;
    Ok(1e-12 - (a - b).abs())
}

fn unitary_distance(rng: &mut ChaCha8Rng, _: &Ctx) -> Result<f64> {
    let inst = instance(rng)?;
    let lhs = spectral_distance(&inst.circuit, &inst.theta1, &inst.theta2)?;
    let mid: f64 = inst
        .theta1
        .iter()
        .zip(inst.theta2.iter())
        .map(|(a, b)| (2.0 * ((a - b) / 4.0).sin()).abs())
        .sum();
    let rhs = sqrt_k(&inst.circuit) / 2.0 * inst.theta1.distance(&inst.theta2);
    Ok((mid - lhs).min(rhs - mid))
}

fn lipschitz_slack(inst: &Instance, p: f64) -> Result<f64> {
    let f1 = qnn_forward(&inst.circuit, &inst.theta1, &inst.x, &inst.obs, p)?;
    let f2 = qnn_forward(&inst.circuit, &inst.theta2, &inst.x, &inst.obs, p)?;
    let q = noise_factor(p, inst.circuit.n_gates());
    let rhs =
        q * sqrt_k(&inst.circuit) * inst.obs.spectral_norm() * inst.theta1.distance(&inst.theta2);
    Ok(rhs - (f1 - f2).abs())
}

fn output_lipschitz(rng: &mut ChaCha8Rng, _: &Ctx) -> Result<f64> {
    lipschitz_slack(&instance(rng)?, 0.0)
}

fn output_lipschitz_noisy(rng: &mut ChaCha8Rng, _: &Ctx) -> Result<f64> {
    let inst = instance(rng)?;
    lipschitz_slack(&inst, random_noise(rng))
}

fn noisy_output_closed_form(rng: &mut ChaCha8Rng, _: &Ctx) -> Result<f64> {
    let inst = instance(rng)?;
    let n = inst.circuit.n_qubits();
    // add an identity component so Tr(O) ≠ 0
    let mut terms = inst.obs.terms().to_vec();
    terms.push((rng.random_range(-1.0..1.0), PauliString::identity(n)));
    let obs = Observable::new(n, terms)?;
    let p = random_noise(rng);
    let clean = qnn_forward(&inst.circuit, &inst.theta1, &inst.x, &obs, 0.0)?;
    let noisy = qnn_forward(&inst.circuit, &inst.theta1, &inst.x, &obs, p)?;
    let q = noise_factor(p, inst.circuit.n_gates());
    let expect = q * clean + (1.0 - q) * obs.trace() / (1u64 << n) as f64;
    Ok(1e-10 - (noisy - expect).abs())
}

fn output_range(rng: &mut ChaCha8Rng, _: &Ctx) -> Result<f64> {
    let inst = instance(rng)?;
    let p = if rng.random::<bool>() {
        0.0
    } else {
        random_noise(rng)
    };
    let f = qnn_forward(&inst.circuit, &inst.theta1, &inst.x, &inst.obs, p)?;
    Ok(inst.obs.spectral_norm() - f.abs())
}

fn loss_certificates(rng: &mut ChaCha8Rng, ctx: &Ctx) -> Result<f64> {
    let (f1, f2) = (rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
    let y = random_label(rng);
    let s = &ctx.loss;
    let (l1, l2) = (loss_value(f1, y, s), loss_value(f2, y, s));
    let dd = (loss_deriv(f1, y, s) - loss_deriv(f2, y, s)).abs();
    Ok(l1
        .min(s.bound - l1)
        .min(s.alpha * (f1 - f2).abs() - (l1 - l2).abs())
        .min(s.nu * (f1 - f2).abs() - dd))
}

fn shift_vs_fd(rng: &mut ChaCha8Rng, _: &Ctx) -> Result<f64> {
    let inst = instance(rng)?;
    let p = if rng.random::<bool>() { 0.0 } else { 0.1 };
    let a = param_shift_grad(&inst.circuit, &inst.theta1, &inst.x, &inst.obs, p)?;
    let b = finite_diff_grad(&inst.circuit, &inst.theta1, &inst.x, &inst.obs, p, FD_STEP)?;
    let worst = a
        .iter()
        .zip(&b)
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max);
    Ok(1e-6 - worst)
}

fn maybe_noisy(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random::<bool>() {
        0.0
    } else {
        random_noise(rng)
    }
}

fn output_gradient_bounds(rng: &mut ChaCha8Rng, _: &Ctx) -> Result<f64> {
    let inst = instance(rng)?;
    let p = maybe_noisy(rng);
    let g = param_shift_grad(&inst.circuit, &inst.theta1, &inst.x, &inst.obs, p)?;
    let q = noise_factor(p, inst.circuit.n_gates());
    let o = inst.obs.spectral_norm();
    let comp = g
        .iter()
        .map(|v| SQRT_2 * q * o - v.abs())
        .fold(f64::INFINITY, f64::min);
    let norm = q * (2.0 * inst.circuit.n_params() as f64).sqrt() * o - l2_norm(&g);
    Ok(comp.min(norm))
}

fn loss_gradient_norm(rng: &mut ChaCha8Rng, ctx: &Ctx) -> Result<f64> {
    let inst = instance(rng)?;
    let p = maybe_noisy(rng);
    let g = loss_grad(
        &inst.circuit,
        &inst.theta1,
        &inst.x,
        inst.y,
        &inst.obs,
        p,
        &ctx.loss,
    )?;
    let q = noise_factor(p, inst.circuit.n_gates());
    Ok(
        SQRT_2 * q * ctx.loss.alpha * sqrt_k(&inst.circuit) * inst.obs.spectral_norm()
            - l2_norm(&g),
    )
}

fn same_sample_slack(inst: &Instance, ctx: &Ctx, p: f64) -> Result<f64> {
    let g1 = loss_grad(
        &inst.circuit,
        &inst.theta1,
        &inst.x,
        inst.y,
        &inst.obs,
        p,
        &ctx.loss,
    )?;
    let g2 = loss_grad(
        &inst.circuit,
        &inst.theta2,
        &inst.x,
        inst.y,
        &inst.obs,
        p,
        &ctx.loss,
    )?;
    let q = noise_factor(p, inst.circuit.n_gates());
    let rhs = q * kappa_of(ctx, &inst.circuit, &inst.obs) * inst.theta1.distance(&inst.theta2);
    Ok(rhs - l2_distance(&g1, &g2))
}

fn gradient_same_sample(rng: &mut ChaCha8Rng, ctx: &Ctx) -> Result<f64> {
    same_sample_slack(&instance(rng)?, ctx, 0.0)
}

fn gradient_same_sample_noisy(rng: &mut ChaCha8Rng, ctx: &Ctx) -> Result<f64> {
    let inst = instance(rng)?;
    same_sample_slack(&inst, ctx, random_noise(rng))
}

fn different_sample_slack(rng: &mut ChaCha8Rng, ctx: &Ctx, p: f64) -> Result<f64> {
    let inst = instance(rng)?;
    let x2 = random_input(rng, inst.circuit.n_qubits());
    let y2 = random_label(rng);
    let g1 = loss_grad(
        &inst.circuit,
        &inst.theta1,
        &inst.x,
        inst.y,
        &inst.obs,
        p,
        &ctx.loss,
    )?;
    let g2 = loss_grad(
        &inst.circuit,
        &inst.theta2,
        &x2,
        y2,
        &inst.obs,
        p,
        &ctx.loss,
    )?;
    let q = noise_factor(p, inst.circuit.n_gates());
    let cap = 2.0 * SQRT_2 * q * ctx.loss.alpha * sqrt_k(&inst.circuit) * inst.obs.spectral_norm();
    Ok(cap - l2_distance(&g1, &g2))
}

fn gradient_different_sample(rng: &mut ChaCha8Rng, ctx: &Ctx) -> Result<f64> {
    different_sample_slack(rng, ctx, 0.0)
}

fn gradient_different_sample_noisy(rng: &mut ChaCha8Rng, ctx: &Ctx) -> Result<f64> {
    let p = random_noise(rng);
    different_sample_slack(rng, ctx, p)
}

fn descent_lemma(rng: &mut ChaCha8Rng, ctx: &Ctx) -> Result<f64> {
    let inst = instance(rng)?;
    let f = |t: &ParameterVector| -> Result<f64> {
        Ok(loss_value(
            qnn_forward(&inst.circuit, t, &inst.x, &inst.obs, 0.0)?,
            inst.y,
            &ctx.loss,
        ))
    };
    let g2 = loss_grad(
        &inst.circuit,
        &inst.theta2,
        &inst.x,
        inst.y,
        &inst.obs,
        0.0,
        &ctx.loss,
    )?;
    let diff: Vec<f64> = inst
        .theta1
        .iter()
        .zip(inst.theta2.iter())
        .map(|(a, b)| a - b)
        .collect();
    let inner: f64 = g2.iter().zip(&diff).map(|(g, d)| g * d).sum();
    let d2: f64 = diff.iter().map(|d| d * d).sum();
    let rhs = inner + kappa_of(ctx, &inst.circuit, &inst.obs) / 2.0 * d2;
    Ok(rhs - (f(&inst.theta1)? - f(&inst.theta2)?))
}

fn gradient_variance_cap(rng: &mut ChaCha8Rng, ctx: &Ctx) -> Result<f64> {
    let inst = instance(rng)?;
    let n = inst.circuit.n_qubits();
    let m = rng.random_range(2..=8);
    let ex = (0..m)
        .map(|_| Example {
            x: random_input(rng, n),
            y: random_label(rng),
        })
        .collect();
    let data = Dataset::new(ex)?;
    let p = maybe_noisy(rng);
    let var = gradient_variance(&inst.circuit, &inst.theta1, &data, &inst.obs, p, &ctx.loss)?;
    let g = SQRT_2 * ctx.loss.alpha * sqrt_k(&inst.circuit) * inst.obs.spectral_norm();
    Ok(g * g - var)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_passes_and_is_deterministic() {
        let a = verify_suite(7, 25);
        assert!(a.passed(), "{}", a.table().to_text());
        assert_eq!(a, verify_suite(7, 25));
        assert_eq!(a.properties.len(), PROPERTIES.len());
    }
}
