//! Paired-run measurement of uniform stability: train on `S` and on the
//! neighbour `S^(i)` from the same `θ₀` with the same index stream, and
//! compare trajectories and losses.

use serde::{Deserialize, Serialize};

use super::{par_map, stats};
use crate::bounds::{kappa, stability_general, BoundQuery, BoundValue};
use crate::circuit::{qnn_forward, Circuit, ParameterVector};
use crate::loss::{loss_value, LossSpec};
use crate::qcore::Observable;
use crate::train::{
    init_params, sgd_train, Dataset, Example, SamplingScheme, SgdConfig, StepSchedule,
};
use crate::{Error, Result};

/// Everything shared by the two runs of a pair.
#[derive(Debug, Clone)]
pub struct PairedConfig {
    pub circuit: Circuit,
    pub obs: Observable,
    pub loss: LossSpec,
    pub schedule: StepSchedule,
    pub sampling: SamplingScheme,
    pub steps: usize,
    pub noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityResult {
    /// Seed-averaged `δ_t = ‖θ_t − θ′_t‖₂`, `t = 0 … T`.
    pub delta_trace: Vec<f64>,
    /// Standard error of `δ_t` across seeds.
    pub delta_se: Vec<f64>,
    /// `max_z |mean_seeds(ℓ(θ_T; z) − ℓ(θ′_T; z))|` over the evaluation set.
    pub loss_gap_sup: f64,
    pub stability_bound: BoundValue,
    /// Per step `t`: `avg δ_{t+1} ≤ (1+η_t κ) avg δ_t + 2√2 η_t α_ℓ √K ‖O‖ / m`
    /// up to three standard errors of the per-seed slack.
    pub per_step_recursion_ok: Vec<bool>,
    /// Worst per-step value of `excess / standard error` (negative when the
    /// recursion holds with room to spare).
    pub worst_recursion_z: f64,
}

impl StabilityResult {
    pub fn bound_holds(&self) -> bool {
        self.loss_gap_sup <= self.stability_bound.value
    }

    pub fn recursion_holds(&self) -> bool {
        self.per_step_recursion_ok.iter().all(|&ok| ok)
    }
}

struct PairRun {
    deltas: Vec<f64>,
    etas: Vec<f64>,
    losses: Vec<f64>,
}

fn run_pair(
    data: &Dataset,
    neighbour: &Dataset,
    cfg: &PairedConfig,
    seed: u64,
    eval: &Dataset,
) -> Result<PairRun> {
    let theta0 = init_params(cfg.circuit.n_params(), seed);
    let sgd = SgdConfig {
        schedule: cfg.schedule,
        sampling: cfg.sampling,
        steps: cfg.steps,
        noise: cfg.noise,
        loss: cfg.loss,
        seed,
        record_risk: false,
        record_grad_norms: false,
    };
    let a = sgd_train(&cfg.circuit, &theta0, data, &cfg.obs, &sgd)?;
    let b = sgd_train(&cfg.circuit, &theta0, neighbour, &cfg.obs, &sgd)?;
    debug_assert_eq!(a.indices, b.indices);
    let deltas = a
        .thetas
        .iter()
        .zip(&b.thetas)
        .map(|(x, y)| x.distance(y))
        .collect();
    let diff = |z: &Example, ta: &ParameterVector, tb: &ParameterVector| -> Result<f64> {
        let fa = qnn_forward(&cfg.circuit, ta, &z.x, &cfg.obs, cfg.noise)?;
        let fb = qnn_forward(&cfg.circuit, tb, &z.x, &cfg.obs, cfg.noise)?;
        Ok(loss_value(fa, z.y, &cfg.loss) - loss_value(fb, z.y, &cfg.loss))
    };
    let losses = eval
        .examples()
        .iter()
        .map(|z| diff(z, a.final_theta(), b.final_theta()))
        .collect::<Result<_>>()?;
    Ok(PairRun {
        deltas,
        etas: a.step_sizes,
        losses,
    })
}

/// Trains every seed on `data` and on `data` with example `replace_index`
/// swapped for `replacement`. Both runs of a seed share `θ₀` and the sampled
/// index sequence, so their difference is due to the swapped example only.
/// `eval` is the fixed set of points over which the loss difference sup is
/// taken; it under-approximates the sup over all `z`.
pub fn paired_stability(
    data: &Dataset,
    replace_index: usize,
    replacement: &Example,
    cfg: &PairedConfig,
    seeds: &[u64],
    eval: &Dataset,
) -> Result<StabilityResult> {
    if seeds.is_empty() {
        return Err(Error::config("paired stability needs at least one seed"));
    }
    let neighbour = data.with_replaced(replace_index, replacement.clone())?;
    let runs = par_map(seeds.to_vec(), |s| run_pair(data, &neighbour, cfg, s, eval))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let steps = cfg.steps;
    let column = |t: usize| runs.iter().map(|r| r.deltas[t]).collect::<Vec<_>>();
    let delta_trace: Vec<f64> = (0..=steps).map(|t| stats::mean(&column(t))).collect();
    let delta_se: Vec<f64> = (0..=steps)
        .map(|t| stats::standard_error(&column(t)))
        .collect();

    let n_eval = eval.len();
    let loss_gap_sup = (0..n_eval)
        .map(|j| stats::mean(&runs.iter().map(|r| r.losses[j]).collect::<Vec<_>>()).abs())
        .fold(0.0, f64::max);

    let m = data.len();
    let k = cfg.circuit.n_params();
    let o_norm = cfg.obs.spectral_norm();
    let mut q = BoundQuery::new(
        cfg.loss.alpha,
        cfg.loss.nu,
        cfg.loss.bound,
        k,
        o_norm,
        m,
        steps,
        cfg.schedule,
    );
    q.kg = cfg.circuit.n_gates();
    let stability_bound = stability_general(&q)?;
    let kap = kappa(&q);
    let jump =
        2.0 * std::f64::consts::SQRT_2 * cfg.loss.alpha * (k as f64).sqrt() * o_norm / m as f64;

    let mut per_step_recursion_ok = Vec::with_capacity(steps);
    let mut worst_recursion_z = f64::NEG_INFINITY;
    for t in 0..steps {
        let excess: Vec<f64> = runs
            .iter()
            .map(|r| r.deltas[t + 1] - (1.0 + r.etas[t] * kap) * r.deltas[t] - r.etas[t] * jump)
            .collect();
        let mu = stats::mean(&excess);
        let se = stats::standard_error(&excess);
        per_step_recursion_ok.push(mu <= 3.0 * se);
        let z = if se > 0.0 {
            mu / se
        } else if mu > 0.0 {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
        worst_recursion_z = worst_recursion_z.max(z);
    }

    Ok(StabilityResult {
        delta_trace,
        delta_se,
        loss_gap_sup,
        stability_bound,
        per_step_recursion_ok,
        worst_recursion_z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::build_hea;
    use crate::data::synthetic_clusters;

    fn cfg(steps: usize) -> PairedConfig {
        PairedConfig {
            circuit: build_hea(2, 1).unwrap(),
            obs: Observable::z(2, 0),
            loss: LossSpec::squared_error(1.0).unwrap(),
            schedule: StepSchedule::Constant { eta: 0.05 },
            sampling: SamplingScheme::UniformWithReplacement,
            steps,
            noise: 0.0,
        }
    }

    #[test]
    fn identical_replacement_gives_zero() {
        let data = synthetic_clusters(2, 8, 0.4, 1).unwrap();
        let eval = synthetic_clusters(2, 16, 0.4, 2).unwrap();
        let same = data.examples()[3].clone();
        let r = paired_stability(&data, 3, &same, &cfg(20), &[1, 2, 3], &eval).unwrap();
        assert!(r.delta_trace.iter().all(|&d| d == 0.0));
        assert_eq!(r.loss_gap_sup, 0.0);
        assert!(r.recursion_holds());
    }

    #[test]
    fn zero_steps() {
        let data = synthetic_clusters(2, 8, 0.4, 1).unwrap();
        let other = synthetic_clusters(2, 1, 0.4, 9).unwrap().examples()[0].clone();
        let r = paired_stability(&data, 0, &other, &cfg(0), &[4], &data).unwrap();
        assert_eq!(r.delta_trace, vec![0.0]);
        assert!(r.per_step_recursion_ok.is_empty());
        assert_eq!(r.stability_bound.value, 0.0);
    }

    #[test]
    fn different_replacement_diverges_within_bound() {
        let data = synthetic_clusters(2, 8, 0.4, 1).unwrap();
        let eval = synthetic_clusters(2, 16, 0.4, 2).unwrap();
        let mut other = data.examples()[0].clone();
        other.y = -other.y;
        let r = paired_stability(&data, 0, &other, &cfg(30), &[1, 2, 3, 4, 5, 6], &eval).unwrap();
        assert_eq!(r.delta_trace[0], 0.0);
        assert!(r.delta_trace[30] > 0.0);
        assert!(r.bound_holds());
        assert!(r.recursion_holds());
    }

    #[test]
    fn bad_index() {
        let data = synthetic_clusters(2, 4, 0.4, 1).unwrap();
        let z = data.examples()[0].clone();
        assert!(matches!(
            paired_stability(&data, 4, &z, &cfg(1), &[1], &data),
            Err(Error::Contract(_))
        ));
    }
}
