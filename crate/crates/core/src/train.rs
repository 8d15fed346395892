//! Single-example SGD, `θ_{t+1} = θ_t − η_t ∇ℓ(θ_t; z_{i_t})`, with risk and
//! gradient-variance estimators.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{qnn_forward, Circuit, EncodedInput, ParameterVector};
use crate::grad::{l2_norm, loss_value_and_grad};
use crate::loss::{loss_value, predict_label, LossSpec};
use crate::qcore::Observable;
use crate::rng::{stream, STREAM_INDICES, STREAM_INIT};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepSchedule {
    Constant {
        eta: f64,
    },
    /// `η_t = c / (t + 1)`
    InverseDecay {
        c: f64,
    },
}

impl StepSchedule {
    pub fn validate(&self) -> Result<()> {
        let v = match *self {
            StepSchedule::Constant { eta } => eta,
            StepSchedule::InverseDecay { c } => c,
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::config(format!(
                "step-size parameter {v} must be positive"
            )));
        }
        Ok(())
    }

    pub fn eta(&self, t: usize) -> f64 {
        match *self {
            StepSchedule::Constant { eta } => eta,
            StepSchedule::InverseDecay { c } => c / (t as f64 + 1.0),
        }
    }

    /// `η_0 … η_{T−1}`.
    pub fn expand(&self, steps: usize) -> Vec<f64> {
        (0..steps).map(|t| self.eta(t)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplingScheme {
    UniformWithReplacement,
    /// Fresh shuffle every `m` steps.
    RandomPermutation,
}

/// Example-index stream of one run. It depends only on the seed and `m`, so
/// two runs with the same seed on neighbouring datasets see the same indices.
pub struct IndexSampler {
    rng: ChaCha8Rng,
    scheme: SamplingScheme,
    m: usize,
    epoch: Vec<usize>,
    pos: usize,
}

impl IndexSampler {
    pub fn new(seed: u64, scheme: SamplingScheme, m: usize) -> Self {
        Self {
            rng: stream(seed, STREAM_INDICES),
            scheme,
            m,
            epoch: Vec::new(),
            pos: 0,
        }
    }
}

impl Iterator for IndexSampler {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        Some(match self.scheme {
            SamplingScheme::UniformWithReplacement => self.rng.random_range(0..self.m),
            SamplingScheme::RandomPermutation => {
                if self.pos == self.epoch.len() {
                    self.epoch = (0..self.m).collect();
                    self.epoch.shuffle(&mut self.rng);
                    self.pos = 0;
                }
                self.pos += 1;
                self.epoch[self.pos - 1]
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub x: EncodedInput,
    /// `±1`
    pub y: f64,
}

/// Labelled training or test set `S = {(x_i, y_i)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    examples: Vec<Example>,
}

impl Dataset {
    pub fn new(examples: Vec<Example>) -> Result<Self> {
        let first = examples
            .first()
            .ok_or_else(|| Error::contract("dataset is empty"))?;
        let d = first.x.len();
        for (i, e) in examples.iter().enumerate() {
            if e.x.len() != d {
                return Err(Error::contract(format!(
                    "example {i} has {} features, expected {d}",
                    e.x.len()
                )));
            }
            if e.y != 1.0 && e.y != -1.0 {
                return Err(Error::contract(format!(
                    "example {i} has label {}, expected ±1",
                    e.y
                )));
            }
        }
        Ok(Self { examples })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.examples[0].x.len()
    }

    /// Copy with example `i` swapped for `replacement` (the neighbour `S^(i)`).
    pub fn with_replaced(&self, i: usize, replacement: Example) -> Result<Self> {
        if i >= self.len() {
            return Err(Error::contract(format!(
                "replace index {i} ≥ m = {}",
                self.len()
            )));
        }
        let mut examples = self.examples.clone();
        examples[i] = replacement;
        Dataset::new(examples)
    }

    pub fn concat(&self, other: &Dataset) -> Result<Self> {
        let mut examples = self.examples.clone();
        examples.extend(other.examples.iter().cloned());
        Dataset::new(examples)
    }
}

/// Fixed settings of one SGD run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub schedule: StepSchedule,
    pub sampling: SamplingScheme,
    pub steps: usize,
    pub noise: f64,
    pub loss: LossSpec,
    pub seed: u64,
    /// Record `R_S(θ_t)` for every iterate.
    pub record_risk: bool,
    /// Record `‖∇R_S(θ_t)‖₂` for `t < T` (one full-batch gradient per step).
    pub record_grad_norms: bool,
}

impl SgdConfig {
    pub fn new(schedule: StepSchedule, steps: usize, loss: LossSpec, seed: u64) -> Self {
        Self {
            schedule,
            sampling: SamplingScheme::UniformWithReplacement,
            steps,
            noise: 0.0,
            loss,
            seed,
            record_risk: false,
            record_grad_norms: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    /// `θ_0 … θ_T`
    pub thetas: Vec<ParameterVector>,
    /// `i_t` for each step.
    pub indices: Vec<usize>,
    pub step_sizes: Vec<f64>,
    /// `R_S(θ_t)` for `t = 0 … T` when recorded, else empty.
    pub risk_trace: Vec<f64>,
    /// `‖∇R_S(θ_t)‖₂` for `t = 0 … T−1` when recorded, else empty.
    pub grad_norm_trace: Vec<f64>,
    pub seed: u64,
}

impl TrainRecord {
    pub fn final_theta(&self) -> &ParameterVector {
        self.thetas.last().expect("record always holds θ_0")
    }
}

/// Independent uniform draws on `[−π, π)` from the run seed.
pub fn init_params(k: usize, seed: u64) -> ParameterVector {
    let mut rng = stream(seed, STREAM_INIT);
    let pi = std::f64::consts::PI;
    ParameterVector::new((0..k).map(|_| rng.random_range(-pi..pi)).collect())
}

pub fn sgd_train(
    circuit: &Circuit,
    theta0: &ParameterVector,
    data: &Dataset,
    obs: &Observable,
    cfg: &SgdConfig,
) -> Result<TrainRecord> {
    cfg.schedule.validate()?;
    if theta0.len() != circuit.n_params() {
        return Err(Error::contract(format!(
            "theta0 has {} entries, circuit has {} parameters",
            theta0.len(),
            circuit.n_params()
        )));
    }
    let mut sampler = IndexSampler::new(cfg.seed, cfg.sampling, data.len());
    let mut rec = TrainRecord {
        thetas: Vec::with_capacity(cfg.steps + 1),
        indices: Vec::with_capacity(cfg.steps),
        step_sizes: Vec::with_capacity(cfg.steps),
        risk_trace: Vec::new(),
        grad_norm_trace: Vec::new(),
        seed: cfg.seed,
    };
    let mut theta = theta0.clone();
    for t in 0..cfg.steps {
        if cfg.record_risk {
            rec.risk_trace.push(empirical_risk(
                circuit, &theta, data, obs, cfg.noise, &cfg.loss,
            )?);
        }
        if cfg.record_grad_norms {
            let g = full_gradient(circuit, &theta, data, obs, cfg.noise, &cfg.loss)?;
            rec.grad_norm_trace.push(l2_norm(&g));
        }
        let i = sampler.next().expect("sampler is infinite");
        let eta = cfg.schedule.eta(t);
        let z = &data.examples()[i];
        let (_, g) = loss_value_and_grad(circuit, &theta, &z.x, z.y, obs, cfg.noise, &cfg.loss)?;
        let next: Vec<f64> = theta.iter().zip(&g).map(|(th, gj)| th - eta * gj).collect();
        rec.thetas.push(theta);
        rec.indices.push(i);
        rec.step_sizes.push(eta);
        theta = ParameterVector::new(next);
    }
    if cfg.record_risk {
        rec.risk_trace.push(empirical_risk(
            circuit, &theta, data, obs, cfg.noise, &cfg.loss,
        )?);
    }
    rec.thetas.push(theta);
    Ok(rec)
}

/// QNN outputs on every example.
pub fn outputs(
    circuit: &Circuit,
    theta: &ParameterVector,
    data: &Dataset,
    obs: &Observable,
    p: f64,
) -> Result<Vec<f64>> {
    data.examples()
        .iter()
        .map(|z| qnn_forward(circuit, theta, &z.x, obs, p))
        .collect()
}

/// `R_S(θ) = (1/m) Σ ℓ(f_θ(x_i); y_i)`.
pub fn empirical_risk(
    circuit: &Circuit,
    theta: &ParameterVector,
    data: &Dataset,
    obs: &Observable,
    p: f64,
    spec: &LossSpec,
) -> Result<f64> {
    non_empty(data)?;
    let f = outputs(circuit, theta, data, obs, p)?;
    let total: f64 = f
        .iter()
        .zip(data.examples())
        .map(|(f, z)| loss_value(*f, z.y, spec))
        .sum();
    Ok(total / data.len() as f64)
}

/// Fraction of examples with `sign(f) ≠ y` (tie predicted `+1`).
pub fn zero_one_error(
    circuit: &Circuit,
    theta: &ParameterVector,
    data: &Dataset,
    obs: &Observable,
    p: f64,
) -> Result<f64> {
    non_empty(data)?;
    let f = outputs(circuit, theta, data, obs, p)?;
    let wrong = f
        .iter()
        .zip(data.examples())
        .filter(|(f, z)| predict_label(**f) != z.y)
        .count();
    Ok(wrong as f64 / data.len() as f64)
}

/// Per-example loss gradients `∇ℓ(θ; z_i)`.
pub fn per_example_gradients(
    circuit: &Circuit,
    theta: &ParameterVector,
    data: &Dataset,
    obs: &Observable,
    p: f64,
    spec: &LossSpec,
) -> Result<Vec<Vec<f64>>> {
    data.examples()
        .iter()
        .map(|z| Ok(loss_value_and_grad(circuit, theta, &z.x, z.y, obs, p, spec)?.1))
        .collect()
}

fn mean_vector(rows: &[Vec<f64>]) -> Vec<f64> {
    let k = rows.first().map_or(0, Vec::len);
    let mut mean = vec![0.0; k];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    let m = rows.len() as f64;
    mean.iter_mut().for_each(|v| *v /= m);
    mean
}

/// `∇R_S(θ)`.
pub fn full_gradient(
    circuit: &Circuit,
    theta: &ParameterVector,
    data: &Dataset,
    obs: &Observable,
    p: f64,
    spec: &LossSpec,
) -> Result<Vec<f64>> {
    non_empty(data)?;
    Ok(mean_vector(&per_example_gradients(
        circuit, theta, data, obs, p, spec,
    )?))
}

/// `σ̂² = (1/m) Σ ‖∇ℓ(θ; z_i) − ∇R_S(θ)‖₂²`.
pub fn gradient_variance(
    circuit: &Circuit,
    theta: &ParameterVector,
    data: &Dataset,
    obs: &Observable,
    p: f64,
    spec: &LossSpec,
) -> Result<f64> {
    non_empty(data)?;
    let grads = per_example_gradients(circuit, theta, data, obs, p, spec)?;
    Ok(variance_of(&grads))
}

pub(crate) fn variance_of(grads: &[Vec<f64>]) -> f64 {
    let mean = mean_vector(grads);
    let total: f64 = grads
        .iter()
        .map(|g| {
            g.iter()
                .zip(&mean)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum();
    total / grads.len() as f64
}

fn non_empty(data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::contract("dataset is empty"));
    }
    Ok(())
}
