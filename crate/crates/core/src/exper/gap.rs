//! Generalization-gap replicates: draw a split, optionally corrupt the
//! training labels, train, and measure train/test loss and 0-1 error.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{par_map, stats};
use crate::circuit::{build_hea, Circuit};
use crate::data::{corrupt_labels, prepare_binary, synthetic_clusters, RawImageSet};
use crate::loss::LossSpec;
use crate::qcore::Observable;
use crate::rng::derive_seed;
use crate::train::{
    empirical_risk, gradient_variance, init_params, sgd_train, zero_one_error, Dataset,
    SamplingScheme, SgdConfig, StepSchedule,
};
use crate::{Error, Result};

/// Where replicate train/test sets come from.
#[derive(Debug, Clone)]
pub enum DataSource {
    /// Class-balanced disjoint draws from an image set, average-pooled to
    /// one feature per qubit.
    Images {
        raw: Arc<RawImageSet>,
        class_a: u8,
        class_b: u8,
    },
    /// Two jittered clusters (see [`synthetic_clusters`]); train and test
    /// come from independent draws.
    Clusters { spread: f64 },
}

impl DataSource {
    pub fn draw(
        &self,
        d: usize,
        m_train: usize,
        m_test: usize,
        seed: u64,
    ) -> Result<(Dataset, Dataset)> {
        match self {
            DataSource::Images {
                raw,
                class_a,
                class_b,
            } => prepare_binary(raw, *class_a, *class_b, d, m_train, m_test, seed),
            DataSource::Clusters { spread } => Ok((
                synthetic_clusters(d, m_train, *spread, derive_seed(seed, 0))?,
                synthetic_clusters(d, m_test, *spread, derive_seed(seed, 1))?,
            )),
        }
    }
}

/// One gap experiment: HEA of `layers` layers on `n_qubits`, readout `Z` on
/// qubit 0, squared-error loss.
#[derive(Debug, Clone)]
pub struct GapConfig {
    pub n_qubits: usize,
    pub layers: usize,
    pub schedule: StepSchedule,
    pub sampling: SamplingScheme,
    pub steps: usize,
    /// Depolarizing level `p` after each gate.
    pub noise: f64,
    /// Probability `r` of resampling each training label.
    pub label_noise: f64,
    pub m_train: usize,
    pub m_test: usize,
    pub seed: u64,
    pub source: DataSource,
}

impl GapConfig {
    /// Four qubits, 64 training and 256 test examples, `η = 0.01`, `T = 200`.
    pub fn desk(source: DataSource, seed: u64) -> Self {
        Self {
            n_qubits: 4,
            layers: 2,
            schedule: StepSchedule::Constant { eta: 0.01 },
            sampling: SamplingScheme::UniformWithReplacement,
            steps: 200,
            noise: 0.0,
            label_noise: 0.0,
            m_train: 64,
            m_test: 256,
            seed,
            source,
        }
    }

    pub fn circuit(&self) -> Result<Circuit> {
        build_hea(self.n_qubits, self.layers)
    }

    pub fn observable(&self) -> Observable {
        Observable::z(self.n_qubits, 0)
    }

    pub fn loss(&self) -> LossSpec {
        LossSpec::squared_error(1.0).expect("unit norm is valid")
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::config(format!(
                "noise level {} outside [0, 1]",
                self.noise
            )));
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return Err(Error::config(format!(
                "label noise {} outside [0, 1]",
                self.label_noise
            )));
        }
        if self.m_train == 0 || self.m_test == 0 {
            return Err(Error::config("m_train and m_test must be positive"));
        }
        self.circuit().map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub replicate: usize,
    pub seed: u64,
    pub train_loss: f64,
    pub test_loss: f64,
    pub train_err01: f64,
    pub test_err01: f64,
    /// `σ̂` (square root of the gradient variance) at `θ_T` on the training set.
    pub sigma_hat: f64,
}

impl GapRow {
    pub fn gap_loss(&self) -> f64 {
        (self.train_loss - self.test_loss).abs()
    }

    pub fn gap_err01(&self) -> f64 {
        (self.train_err01 - self.test_err01).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapStats {
    pub rows: Vec<GapRow>,
    pub mean_gap_loss: f64,
    pub sd_gap_loss: f64,
    pub mean_gap_err01: f64,
    pub sd_gap_err01: f64,
    pub mean_sigma_hat: f64,
}

impl GapStats {
    fn from_rows(rows: Vec<GapRow>) -> Self {
        let gl: Vec<f64> = rows.iter().map(GapRow::gap_loss).collect();
        let ge: Vec<f64> = rows.iter().map(GapRow::gap_err01).collect();
        let sh: Vec<f64> = rows.iter().map(|r| r.sigma_hat).collect();
        Self {
            mean_gap_loss: stats::mean(&gl),
            sd_gap_loss: stats::std_dev(&gl),
            mean_gap_err01: stats::mean(&ge),
            sd_gap_err01: stats::std_dev(&ge),
            mean_sigma_hat: stats::mean(&sh),
            rows,
        }
    }
}

fn replicate(cfg: &GapConfig, rep: usize) -> Result<GapRow> {
    let seed = derive_seed(cfg.seed, rep as u64);
    let circuit = cfg.circuit()?;
    let obs = cfg.observable();
    let loss = cfg.loss();
    let (train, test) = cfg
        .source
        .draw(cfg.n_qubits, cfg.m_train, cfg.m_test, seed)?;
    let train = corrupt_labels(&train, cfg.label_noise, seed)?;
    let theta0 = init_params(circuit.n_params(), seed);
    let sgd = SgdConfig {
        schedule: cfg.schedule,
        sampling: cfg.sampling,
        steps: cfg.steps,
        noise: cfg.noise,
        loss,
        seed,
        record_risk: false,
        record_grad_norms: false,
    };
    let rec = sgd_train(&circuit, &theta0, &train, &obs, &sgd)?;
    let th = rec.final_theta();
    let p = cfg.noise;
    Ok(GapRow {
        replicate: rep,
        seed,
        train_loss: empirical_risk(&circuit, th, &train, &obs, p, &loss)?,
        test_loss: empirical_risk(&circuit, th, &test, &obs, p, &loss)?,
        train_err01: zero_one_error(&circuit, th, &train, &obs, p)?,
        test_err01: zero_one_error(&circuit, th, &test, &obs, p)?,
        sigma_hat: gradient_variance(&circuit, th, &train, &obs, p, &loss)?.sqrt(),
    })
}

/// Runs `replicates` independent training runs. Replicate `r` uses seed
/// `derive_seed(cfg.seed, r)` for its split, labels, `θ₀` and index stream,
/// so configurations that differ in one knob share all other randomness.
pub fn gap_experiment(cfg: &GapConfig, replicates: usize) -> Result<GapStats> {
    if replicates == 0 {
        return Err(Error::config("need at least one replicate"));
    }
    cfg.validate()?;
    let rows = par_map((0..replicates).collect(), |r| replicate(cfg, r))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(GapStats::from_rows(rows))
}
