use std::f64::consts::{FRAC_PI_4, FRAC_PI_6};

use sgi_core::config::ExperimentConfig;
use sgi_core::runner::Experiment;
use sgi_core::stats::{conservation_audit, engine_equivalence};
use sgi_core::{prepare_qubit, run, BhsiParams, EngineKind, Stage};

fn cfg(stage: Stage, engine: EngineKind, theta: f64, trials: u64, seed: u64) -> ExperimentConfig {
    ExperimentConfig::new(
        stage,
        engine,
        prepare_qubit(theta, 0.0).unwrap(),
        trials,
        seed,
    )
}

#[test]
fn uncommitted_rate_matches_binomial() {
    let n = 100_000u64;
    let mut c = cfg(Stage::One, EngineKind::BranchedSubspace, FRAC_PI_4, n, 3);
    c.bhsi = Some(BhsiParams {
        p_uncommitted: 0.1,
        ..Default::default()
    });
    let r = run(&c, 0).unwrap();
    let sigma = (n as f64 * 0.1 * 0.9).sqrt();
    let v = r.audit.probability_violations as f64;
    assert!((v - 10_000.0).abs() <= 3.0 * sigma, "{v}");
    assert_eq!(r.audit.forbidden, 0);
    assert!(r.audit.pass);
}

#[test]
fn ci_audit_is_clean() {
    let exp = Experiment::new(&cfg(Stage::One, EngineKind::Copenhagen, FRAC_PI_6, 1, 9)).unwrap();
    let records: Vec<_> = (0..100_000).map(|i| exp.trial(i).unwrap().0).collect();
    let a = conservation_audit(&records).unwrap();
    assert_eq!(
        (a.forbidden, a.probability_violations, a.pass),
        (0, 0, true)
    );
}

#[test]
fn delayed_choice_is_detected_against_ci() {
    let n = 1_000_000;
    let ci = run(&cfg(Stage::One, EngineKind::Copenhagen, FRAC_PI_4, n, 1), 0).unwrap();
    let mut b = cfg(Stage::One, EngineKind::BranchedSubspace, FRAC_PI_4, n, 2);
    b.bhsi = Some(BhsiParams {
        p_delayed: 0.05,
        ..Default::default()
    });
    let bh = run(&b, 0).unwrap();
    let t = engine_equivalence(&ci.outcomes, &bh.outcomes).unwrap();
    assert!(t.p_value < 1e-6, "{}", t.p_value);
    let rate = &bh.anomaly_rates["delayed-choice"];
    assert!(rate.lower <= 0.05 && 0.05 <= rate.upper, "{rate:?}");
}

#[test]
fn rate_bounds_and_totals_hold_in_reports() {
    let mut c = cfg(Stage::Two, EngineKind::BranchedSubspace, 0.4, 50_000, 12);
    c.bhsi = Some(BhsiParams {
        p_delayed: 0.1,
        p_uncommitted: 0.1,
        p_double_ts: 0.1,
        p_recohere: 0.2,
        ..Default::default()
    });
    let r = run(&c, 0).unwrap();
    assert_eq!(r.histogram.total(), r.trial_count);
    assert_eq!(r.outcomes.total(), r.trial_count);
    for est in r.anomaly_rates.values() {
        assert!(
            0.0 <= est.lower && est.lower <= est.rate && est.rate <= est.upper && est.upper <= 1.0
        );
    }
}

#[test]
fn mwi_born_test_calibrated() {
    // across seeds a calibrated test rejects at 0.001 essentially never
    let mut rejections = 0;
    for seed in 0..20 {
        let r = run(
            &cfg(Stage::One, EngineKind::ManyWorlds, FRAC_PI_6, 100_000, seed),
            0,
        )
        .unwrap();
        if r.born_test.unwrap().significant {
            rejections += 1;
        }
    }
    assert!(rejections <= 1, "{rejections}");
}
