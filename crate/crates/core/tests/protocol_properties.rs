use std::f64::consts::{PI, TAU};

use proptest::prelude::*;

use zeno_core::protocol::{
    end_to_end_recovery, estimate_delta_b, exact_delta, heterodyne_delta, ideal_zeno_survival, model_delta,
    nutation_phase_n, DecayProfile, ErrorMode, ProtocolPoint, RecoveryConfig,
};
use zeno_core::{Estimate, ExperimentParams, ZenoError};

fn point(omega_tau: f64, a: f64, b: f64, n: u32) -> ProtocolPoint {
    ProtocolPoint::from_phase(&nutation_phase_n(omega_tau, a, b, n).unwrap(), 0.0)
}

#[test]
fn heterodyne_of_exact_phases_tracks_expansion() {
    // The exact per-pulse difference equals half the expanded δ_mn, up to the next order.
    for &omega_tau in &[TAU, 2.0 * TAU, 3.0 * TAU + 1.0, 4.0 * PI / 3.0] {
        for &(a, b) in &[(0.4, 0.2), (0.3, 0.05), (0.15, 0.1)] {
            for &(m, n) in &[(2u32, 1u32), (10, 1), (10, 2), (100, 3)] {
                let measured = heterodyne_delta(&point(omega_tau, a, b, m), &point(omega_tau, a, b, n)).unwrap().value;
                let direct = exact_delta(omega_tau, a, b, b, m, n).unwrap();
                assert!((measured - direct).abs() < 1e-10, "unwrap mismatch {measured} vs {direct}");

                let model = model_delta(omega_tau, a, b, 0.0, m, n).unwrap();
                let x = (a - b) / (f64::from(n) * omega_tau);
                let bound = x.powi(4) * omega_tau;
                assert!(
                    (measured - 0.5 * model).abs() <= bound,
                    "Ωτ={omega_tau} a={a} b={b} m={m} n={n}: exact {measured} vs model/2 {}",
                    0.5 * model
                );
            }
        }
    }
}

#[test]
fn inversion_error_propagation_matches_example() {
    // Ratio error 4e-4 at a − b₁ = 0.2 → δb error 1.6e-4.
    let r = estimate_delta_b(
        Estimate::new(0.75, 4e-4),
        Estimate::exact(1.0),
        0.0,
        Estimate::exact(0.2),
        None,
    )
    .unwrap();
    assert!((r.standard_error - 1.6e-4).abs() < 1e-12);
}

#[test]
fn finite_m_correction_restores_limit() {
    let (w, a, b) = (TAU, 0.4, 0.2);
    let d21 = model_delta(w, a, b, 0.0, 2, 1).unwrap();
    let d10 = model_delta(w, a, b, 0.0, 10, 1).unwrap();
    let r = estimate_delta_b(Estimate::exact(d21), Estimate::exact(d10), 0.0, Estimate::exact(a - b), Some(10)).unwrap();
    assert!(r.delta_b.abs() < 1e-12);
}

proptest! {
    #[test]
    fn inversion_undoes_model(delta_b in -0.05f64..0.05, omega_tau in 3.0f64..30.0, c in 0.1f64..0.5) {
        let a = c + 0.1;
        let b1 = 0.1;
        let d21 = model_delta(omega_tau, a, b1, delta_b, 2, 1).unwrap();
        let dinf = model_delta(omega_tau, a, b1, delta_b, u32::MAX, 1).unwrap();
        let e = estimate_delta_b(Estimate::exact(d21), Estimate::exact(dinf), 0.0, Estimate::exact(c), None).unwrap();
        prop_assert!((e.delta_b - delta_b).abs() < 1e-12, "{} vs {delta_b}", e.delta_b);
    }

    #[test]
    fn zeno_survival_rises_with_projections(x in 1e-3f64..=PI, n in 1u64..5_000) {
        prop_assert!(ideal_zeno_survival(x, n + 1) >= ideal_zeno_survival(x, n));
    }

    #[test]
    fn zeno_freeze_bound(x in 1e-3f64..=PI, n in 100u64..100_000) {
        let loss = 1.0 - ideal_zeno_survival(x, n);
        prop_assert!(loss <= x * x / (4.0 * n as f64) * 1.01);
    }
}

fn recovery(delta_b: f64, seed: u64) -> RecoveryConfig {
    RecoveryConfig {
        base: ExperimentParams {
            ground_branching_factor: 1.0,
            metastable_mixing_factor: 1.0,
            measurements_per_trajectory: 250_000,
            ..ExperimentParams::undamped(4.0 * PI / 3.0, 1e-3)
        },
        a: 0.52,
        profile: DecayProfile::shifted(0.02, delta_b),
        m: 10,
        trajectories_per_point: 40,
        master_seed: seed,
        error_mode: ErrorMode::DeltaMethod,
    }
}

#[test]
fn null_protocol_is_consistent_with_zero() {
    let r = end_to_end_recovery(&recovery(0.0, 1)).unwrap();
    assert!(r.points.iter().all(|p| p.theta_prime.standard_error <= 1e-2));
    let z = r.estimate.delta_b / r.estimate.standard_error;
    assert!(z.abs() < 3.0, "δb = {} ± {}", r.estimate.delta_b, r.estimate.standard_error);
}

#[test]
fn recovery_is_deterministic_and_thread_independent() {
    let mut cfg = recovery(0.01, 4);
    cfg.trajectories_per_point = 4;
    cfg.base.measurements_per_trajectory = 50_000;
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let a = one.install(|| end_to_end_recovery(&cfg)).unwrap();
    let b = three.install(|| end_to_end_recovery(&cfg)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn bootstrap_error_agrees_with_delta_method() {
    let mut cfg = recovery(0.01, 2);
    cfg.error_mode = ErrorMode::MonteCarlo { replicas: 400 };
    let r = end_to_end_recovery(&cfg).unwrap();
    let mc = r.monte_carlo_error.unwrap();
    let ratio = mc / r.estimate.standard_error;
    assert!((0.8..1.25).contains(&ratio), "bootstrap {mc} vs delta {}", r.estimate.standard_error);
    assert_eq!(r.standard_error(), mc);
}

#[test]
fn duplicate_rate_is_rejected() {
    let mut cfg = recovery(0.0, 0);
    cfg.m = 1;
    assert_eq!(end_to_end_recovery(&cfg).unwrap_err(), ZenoError::DuplicateN(1));
}
