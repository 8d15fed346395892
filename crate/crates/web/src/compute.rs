//! The demo computations, free of any JavaScript types.

use std::f64::consts::{PI, SQRT_2};

use qnn_stability::bounds::{kappa, noisy_stability, BoundQuery};
use qnn_stability::circuit::{build_hea, qnn_forward, EncodedInput};
use qnn_stability::exper::{paired_stability, DataSource, PairedConfig};
use qnn_stability::grad::param_shift_grad;
use qnn_stability::loss::LossSpec;
use qnn_stability::qcore::Observable;
use qnn_stability::rng::derive_seed;
use qnn_stability::train::{init_params, Dataset, SamplingScheme, StepSchedule};
use qnn_stability::{Error, Result};

/// Squared-error loss constants on a unit-norm observable.
const ALPHA: f64 = 4.0;
const NU: f64 = 2.0;
const BIG_M: f64 = 4.0;

/// Held-out points the loss difference is evaluated on.
const EVAL_POINTS: usize = 32;

pub fn bound_curves(
    k: usize,
    m: usize,
    eta: f64,
    t_max: usize,
    noise_levels: &[f64],
) -> Result<Vec<f64>> {
    if t_max == 0 {
        return Err(Error::Config("t_max must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(t_max * noise_levels.len());
    for &p in noise_levels {
        let mut q = BoundQuery::new(
            ALPHA,
            NU,
            BIG_M,
            k,
            1.0,
            m,
            1,
            StepSchedule::Constant { eta },
        );
        q.p = p;
        for t in 1..=t_max {
            q.t = t;
            out.push(noisy_stability(&q)?.ln_value / std::f64::consts::LN_10);
        }
    }
    Ok(out)
}

pub fn output_landscape(
    qubits: usize,
    layers: usize,
    param: usize,
    noise: f64,
    seed: u64,
    points: usize,
) -> Result<Vec<f64>> {
    let circuit = build_hea(qubits, layers)?;
    if param >= circuit.n_params() {
        return Err(Error::Config(format!(
            "parameter {param} out of range, the circuit has {}",
            circuit.n_params()
        )));
    }
    if points < 2 {
        return Err(Error::Config("need at least two points".into()));
    }
    let obs = Observable::z(qubits, 0);
    let x = EncodedInput::new(vec![PI / 4.0; qubits])?;
    let base = init_params(circuit.n_params(), seed);
    let mut out = Vec::with_capacity(3 * points);
    for i in 0..points {
        let angle = -PI + 2.0 * PI * i as f64 / (points - 1) as f64;
        let theta = base.shifted(param, angle - base[param]);
        out.push(angle);
        out.push(qnn_forward(&circuit, &theta, &x, &obs, noise)?);
        out.push(param_shift_grad(&circuit, &theta, &x, &obs, noise)?[param]);
    }
    Ok(out)
}

pub fn stability_trace(
    qubits: usize,
    layers: usize,
    m: usize,
    eta: f64,
    steps: usize,
    seeds: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::Config("m must be at least 1".into()));
    }
    let source = DataSource::Clusters { spread: 0.3 };
    let (train, pool) = source.draw(qubits, m, EVAL_POINTS + 1, seed)?;
    let eval = Dataset::new(pool.examples()[..EVAL_POINTS].to_vec())?;
    let circuit = build_hea(qubits, layers)?;
    let k = circuit.n_params();
    let cfg = PairedConfig {
        circuit,
        obs: Observable::z(qubits, 0),
        loss: LossSpec::squared_error(1.0)?,
        schedule: StepSchedule::Constant { eta },
        sampling: SamplingScheme::UniformWithReplacement,
        steps,
        noise: 0.0,
    };
    let seeds: Vec<u64> = (0..seeds as u64).map(|i| derive_seed(seed, i)).collect();
    let r = paired_stability(
        &train,
        0,
        &pool.examples()[EVAL_POINTS],
        &cfg,
        &seeds,
        &eval,
    )?;

    // δ_{t+1} ≤ (1+ηκ)δ_t + 2√2·η·α·√K·‖O‖/m, started from δ_0 = 0
    let q = BoundQuery::new(
        ALPHA,
        NU,
        BIG_M,
        k,
        1.0,
        m,
        steps,
        StepSchedule::Constant { eta },
    );
    let growth = 1.0 + eta * kappa(&q);
    let kick = 2.0 * SQRT_2 * eta * ALPHA * (k as f64).sqrt() / m as f64;
    let mut env = 0.0;
    let mut out = Vec::with_capacity(2 * (steps + 1));
    for d in &r.delta_trace {
        out.push(*d);
        out.push(env);
        env = growth * env + kick;
    }
    Ok(out)
}
