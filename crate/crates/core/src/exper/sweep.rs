//! One-knob sweeps of the gap experiment.

use std::fmt;
use std::str::FromStr;

use super::gap::{gap_experiment, GapConfig, GapStats};
use crate::report::{Cell, Table};
use crate::train::StepSchedule;
use crate::{Error, Result};

/// The knob a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    /// Number of ansatz layers (trainable gates `K = 2nL`).
    F1,
    /// Constant step size `η`.
    F2,
    /// Depolarizing level `p`.
    F3,
    /// Label-corruption probability `r`.
    F4,
}

impl SweepKind {
    pub fn knob(self) -> &'static str {
        match self {
            SweepKind::F1 => "layers",
            SweepKind::F2 => "eta",
            SweepKind::F3 => "p",
            SweepKind::F4 => "r",
        }
    }

    /// Desk-scale grid.
    pub fn default_grid(self) -> Vec<f64> {
        match self {
            SweepKind::F1 => vec![2.0, 3.0, 4.0, 5.0],
            SweepKind::F2 => vec![0.001, 0.005, 0.01, 0.05],
            SweepKind::F3 => vec![0.001, 0.01, 0.05, 0.1],
            SweepKind::F4 => vec![0.1, 0.3, 0.5],
        }
    }

    /// Desk-scale base configuration: the shared defaults of
    /// [`GapConfig::desk`] with the per-sweep layer count.
    pub fn base_config(self, cfg: GapConfig) -> GapConfig {
        let layers = match self {
            SweepKind::F1 | SweepKind::F3 | SweepKind::F4 => 2,
            SweepKind::F2 => 3,
        };
        GapConfig { layers, ..cfg }
    }

    /// `base` with the knob set to `value`.
    pub fn apply(self, base: &GapConfig, value: f64) -> Result<GapConfig> {
        let mut cfg = base.clone();
        let bad = || Error::config(format!("invalid {} value {value}", self.knob()));
        match self {
            SweepKind::F1 => {
                if !(value >= 1.0 && value.fract() == 0.0 && value <= 64.0) {
                    return Err(bad());
                }
                cfg.layers = value as usize;
            }
            SweepKind::F2 => {
                if !(value > 0.0 && value.is_finite()) {
                    return Err(bad());
                }
                cfg.schedule = StepSchedule::Constant { eta: value };
            }
            SweepKind::F3 => {
                if !(0.0..=1.0).contains(&value) {
                    return Err(bad());
                }
                cfg.noise = value;
            }
            SweepKind::F4 => {
                if !(0.0..=1.0).contains(&value) {
                    return Err(bad());
                }
                cfg.label_noise = value;
            }
        }
        Ok(cfg)
    }
}

impl FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f1" => Ok(SweepKind::F1),
            "f2" => Ok(SweepKind::F2),
            "f3" => Ok(SweepKind::F3),
            "f4" => Ok(SweepKind::F4),
            other => Err(Error::config(format!(
                "unknown sweep {other:?}, expected f1..f4"
            ))),
        }
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SweepKind::F1 => "f1",
            SweepKind::F2 => "f2",
            SweepKind::F3 => "f3",
            SweepKind::F4 => "f4",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub kind: SweepKind,
    pub grid: Vec<f64>,
    pub stats: Vec<GapStats>,
}

impl SweepResult {
    pub fn mean_gap_loss(&self) -> Vec<f64> {
        self.stats.iter().map(|s| s.mean_gap_loss).collect()
    }

    pub fn mean_sigma_hat(&self) -> Vec<f64> {
        self.stats.iter().map(|s| s.mean_sigma_hat).collect()
    }

    /// One row per grid point and replicate: `knob, replicate, train_loss,
    /// test_loss, gap_loss, gap_err01`, plus `sigma_hat` for `F4`.
    pub fn table(&self) -> Table {
        let mut cols = vec![
            self.kind.knob(),
            "replicate",
            "train_loss",
            "test_loss",
            "gap_loss",
            "gap_err01",
        ];
        if self.kind == SweepKind::F4 {
            cols.push("sigma_hat");
        }
        let mut t = Table::new(cols);
        for (v, s) in self.grid.iter().zip(&self.stats) {
            for r in &s.rows {
                let knob = if self.kind == SweepKind::F1 {
                    Cell::Int(*v as i64)
                } else {
                    Cell::Float(*v)
                };
                let mut row = vec![
                    knob,
                    r.replicate.into(),
                    r.train_loss.into(),
                    r.test_loss.into(),
                    r.gap_loss().into(),
                    r.gap_err01().into(),
                ];
                if self.kind == SweepKind::F4 {
                    row.push(r.sigma_hat.into());
                }
                t.push(row).expect("row matches header");
            }
        }
        t
    }

    /// Per-grid-point means.
    pub fn summary(&self) -> Table {
        let mut t = Table::new([
            self.kind.knob(),
            "replicates",
            "mean_gap_loss",
            "sd_gap_loss",
            "mean_gap_err01",
            "sd_gap_err01",
            "mean_sigma_hat",
        ]);
        for (v, s) in self.grid.iter().zip(&self.stats) {
            t.push(vec![
                Cell::Float(*v),
                s.rows.len().into(),
                s.mean_gap_loss.into(),
                s.sd_gap_loss.into(),
                s.mean_gap_err01.into(),
                s.sd_gap_err01.into(),
                s.mean_sigma_hat.into(),
            ])
            .expect("row matches header");
        }
        t
    }
}

/// Runs [`gap_experiment`] at every grid value. All grid points use the same
/// replicate seeds, so neighbouring points differ only in the swept knob.
pub fn sweep(
    kind: SweepKind,
    grid: &[f64],
    base: &GapConfig,
    replicates: usize,
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::config("sweep grid is empty"));
    }
    let configs = grid
        .iter()
        .map(|&v| kind.apply(base, v))
        .collect::<Result<Vec<_>>>()?;
    let stats = configs
        .iter()
        .map(|c| gap_experiment(c, replicates))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        kind,
        grid: grid.to_vec(),
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exper::DataSource;

    fn tiny() -> GapConfig {
        let mut c = GapConfig::desk(DataSource::Clusters { spread: 0.5 }, 1);
        c.n_qubits = 2;
        c.steps = 5;
        c.m_train = 6;
        c.m_test = 6;
        c
    }

    #[test]
    fn f3_schema() {
        let r = sweep(SweepKind::F3, &[0.0, 0.1], &tiny(), 2).unwrap();
        let t = r.table();
        assert_eq!(
            t.columns(),
            [
                "p",
                "replicate",
                "train_loss",
                "test_loss",
                "gap_loss",
                "gap_err01"
            ]
        );
        assert_eq!(t.rows().len(), 4);
        let f4 = sweep(SweepKind::F4, &[0.5], &tiny(), 1).unwrap().table();
        assert_eq!(f4.columns().last().unwrap(), "sigma_hat");
    }

    #[test]
    fn invalid_grid_values() {
        assert!(sweep(SweepKind::F1, &[1.5], &tiny(), 1).is_err());
        assert!(sweep(SweepKind::F2, &[0.0], &tiny(), 1).is_err());
        assert!(sweep(SweepKind::F3, &[1.2], &tiny(), 1).is_err());
        assert!(sweep(SweepKind::F4, &[-0.1], &tiny(), 1).is_err());
        assert!("f5".parse::<SweepKind>().is_err());
    }

    #[test]
    fn csv_is_reproducible() {
        let a = sweep(SweepKind::F2, &[0.01, 0.05], &tiny(), 2)
            .unwrap()
            .table()
            .to_csv();
        let b = sweep(SweepKind::F2, &[0.01, 0.05], &tiny(), 2)
            .unwrap()
            .table()
            .to_csv();
        assert_eq!(a, b);
    }
}
