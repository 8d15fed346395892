//! End-to-end runs on the bundled digit subset.

use std::path::PathBuf;
use std::sync::Arc;

use qnn_stability::circuit::build_hea;
use qnn_stability::data::{corrupt_labels, load_idx, prepare_binary, read_dataset, write_dataset};
use qnn_stability::exper::{
    gap_experiment, paired_stability, verify_suite_with, DataSource, GapConfig, PairedConfig,
    VerifyOptions,
};
use qnn_stability::loss::LossSpec;
use qnn_stability::qcore::Observable;
use qnn_stability::train::{init_params, sgd_train, SamplingScheme, SgdConfig, StepSchedule};

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn raw() -> qnn_stability::data::RawImageSet {
    let d = data_dir();
    load_idx(
        d.join("mnist-01-subset-images.idx"),
        d.join("mnist-01-subset-labels.idx"),
    )
    .unwrap()
}

#[test]
fn bundled_subset_headers() {
    let r = raw();
    assert_eq!((r.rows, r.cols, r.len()), (28, 28, 800));
    assert_eq!(r.labels.iter().filter(|&&l| l == 0).count(), 400);
    assert_eq!(r.labels.iter().filter(|&&l| l == 1).count(), 400);
    let again = raw();
    assert_eq!(r, again);
}

#[test]
fn prepared_sets_round_trip_through_files() {
    let (train, test) = prepare_binary(&raw(), 0, 1, 4, 64, 256, 11).unwrap();
    for e in train.examples().iter().chain(test.examples()) {
        assert!(e
            .x
            .features()
            .iter()
            .all(|v| (0.0..=std::f64::consts::PI).contains(v)));
        assert!(e.y == 1.0 || e.y == -1.0);
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("train.csv");
    write_dataset(&train, &path).unwrap();
    assert_eq!(read_dataset(&path).unwrap(), train);
}

#[test]
fn training_reduces_risk_and_is_reproducible() {
    let (train, _) = prepare_binary(&raw(), 0, 1, 4, 32, 32, 5).unwrap();
    let c = build_hea(4, 2).unwrap();
    let obs = Observable::z(4, 0);
    let mut cfg = SgdConfig::new(
        StepSchedule::Constant { eta: 0.05 },
        150,
        LossSpec::squared_error(1.0).unwrap(),
        5,
    );
    cfg.record_risk = true;
    let theta0 = init_params(c.n_params(), 5);
    let a = sgd_train(&c, &theta0, &train, &obs, &cfg).unwrap();
    assert!(a.risk_trace[150] < a.risk_trace[0]);
    assert_eq!(a, sgd_train(&c, &theta0, &train, &obs, &cfg).unwrap());
}

#[test]
fn corrupted_labels_raise_gradient_variance() {
    let src = DataSource::Images {
        raw: Arc::new(raw()),
        class_a: 0,
        class_b: 1,
    };
    let mut cfg = GapConfig::desk(src, 9);
    cfg.steps = 50;
    cfg.m_test = 64;
    let clean = gap_experiment(&cfg, 4).unwrap();
    cfg.label_noise = 0.5;
    let noisy = gap_experiment(&cfg, 4).unwrap();
    assert!(noisy.mean_sigma_hat > clean.mean_sigma_hat);
    let g2 = 2.0 * 16.0 * 16.0;
    assert!(noisy.rows.iter().all(|r| r.sigma_hat * r.sigma_hat <= g2));
}

#[test]
fn label_corruption_keeps_features() {
    let (train, _) = prepare_binary(&raw(), 0, 1, 4, 16, 16, 2).unwrap();
    let c = corrupt_labels(&train, 1.0, 3).unwrap();
    for (a, b) in train.examples().iter().zip(c.examples()) {
        assert_eq!(a.x, b.x);
    }
}

#[test]
fn paired_runs_on_digits_respect_the_bound() {
    let (train, pool) = prepare_binary(&raw(), 0, 1, 4, 16, 65, 3).unwrap();
    let eval = qnn_stability::train::Dataset::new(pool.examples()[..64].to_vec()).unwrap();
    let cfg = PairedConfig {
        circuit: build_hea(4, 1).unwrap(),
        obs: Observable::z(4, 0),
        loss: LossSpec::squared_error(1.0).unwrap(),
        schedule: StepSchedule::Constant { eta: 1e-3 },
        sampling: SamplingScheme::RandomPermutation,
        steps: 40,
        noise: 0.0,
    };
    let r = paired_stability(
        &train,
        2,
        &pool.examples()[64],
        &cfg,
        &[1, 2, 3, 4, 5],
        &eval,
    )
    .unwrap();
    assert!(r.bound_holds());
    assert!(r.recursion_holds());
    assert_eq!(r.delta_trace.len(), 41);
}

#[test]
fn verification_suite_catches_a_halved_kappa() {
    let ok = verify_suite_with(&VerifyOptions {
        seed: 7,
        cases: 1000,
        kappa_scale: 1.0,
    });
    assert!(ok.passed());
    let bad = verify_suite_with(&VerifyOptions {
        seed: 7,
        cases: 1000,
        kappa_scale: 0.5,
    });
    assert!(!bad.property("gradient_same_sample").unwrap().passed());
    let again = verify_suite_with(&VerifyOptions {
        seed: 7,
        cases: 1000,
        kappa_scale: 1.0,
    });
    assert_eq!(ok, again);
}
