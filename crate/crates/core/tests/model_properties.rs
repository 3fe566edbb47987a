use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use zeno_core::model::{coherent_survival, survival_probability};
use zeno_core::qnd::qnd_defect;
use zeno_core::{derive_rates, ExperimentParams};

fn damped(omega_tau: f64, tau: f64, gamma: f64, gamma_ph: f64, f0: f64, f1: f64) -> ExperimentParams {
    ExperimentParams {
        rabi_frequency: omega_tau / tau,
        drive_duration: tau,
        inversion_decay_rate: gamma,
        drive_phase_diffusion_rate: gamma_ph,
        ground_branching_factor: f0,
        metastable_mixing_factor: f1,
        ..ExperimentParams::default()
    }
}

proptest! {
    #[test]
    fn rates_round_trip(
        tau in 1e-5f64..1e-1,
        gamma in 0.0f64..1e3,
        gamma_ph in 0.0f64..1e3,
    ) {
        let b_guess = 0.5 * gamma * tau;
        let a_guess = 0.5 * (gamma_ph + 0.5 * gamma) * tau;
        let omega_tau = (a_guess - b_guess).abs() + 1.0;
        let r = derive_rates(&damped(omega_tau, tau, gamma, gamma_ph, 1.0, 1.0)).unwrap();
        let gamma_back = 2.0 * r.b / tau;
        let gamma_ph_back = (2.0 * r.a - r.b) / tau;
        prop_assert!((gamma_back - gamma).abs() <= 1e-12 * gamma.max(1e-300) + 1e-300);
        prop_assert!((gamma_ph_back - gamma_ph).abs() <= 1e-12 * gamma_ph.max(gamma) + 1e-300);
    }

    #[test]
    fn repeat_probabilities_stay_in_unit_interval(
        omega_tau in 0.0f64..60.0,
        tau in 1e-4f64..1e-2,
        b in 0.0f64..3.0,
        extra in 0.0f64..3.0,
        f0 in 0.0f64..=1.0,
        f1 in 0.0f64..=1.0,
    ) {
        // 2a = (γ_ph + Γ/2)τ ≥ b, so a = b/2 + extra/2 covers the valid cone.
        let a = 0.5 * b + 0.5 * extra;
        prop_assume!(omega_tau * omega_tau >= (a - b) * (a - b));
        let p = ExperimentParams {
            ground_branching_factor: f0,
            metastable_mixing_factor: f1,
            ..ExperimentParams::from_relaxation(omega_tau, tau, a, b)
        };
        let r = derive_rates(&p).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.p0), "p0 = {}", r.p0);
        prop_assert!((0.0..=1.0).contains(&r.p1), "p1 = {}", r.p1);
    }

    #[test]
    fn collapse_survival_is_non_increasing(p in 0.0f64..1.0, q in 0u64..200) {
        prop_assert!(survival_probability(p, q + 1) <= survival_probability(p, q));
    }

    #[test]
    fn commuting_pairs_have_no_defect(
        dim in 1usize..6,
        seeds in proptest::collection::vec(-PI..PI, 36),
        phases in proptest::collection::vec(-PI..PI, 6),
        values in proptest::collection::vec(-3.0f64..3.0, 6),
    ) {
        // Shared eigenbasis from the QR factor of a random complex matrix.
        let m = DMatrix::from_fn(dim, dim, |i, j| {
            let t = seeds[i * 6 + j];
            Complex64::new(t.cos() + (i == j) as u8 as f64, t.sin())
        });
        let q = m.qr().q();
        let d_u = DMatrix::from_fn(dim, dim, |i, j| if i == j { Complex64::from_polar(1.0, phases[i]) } else { Complex64::new(0.0, 0.0) });
        let d_x = DMatrix::from_fn(dim, dim, |i, j| if i == j { Complex64::new(values[i], 0.0) } else { Complex64::new(0.0, 0.0) });
        let u = &q * d_u * q.adjoint();
        let x = &q * d_x * q.adjoint();
        let defect = qnd_defect(&u, &x).unwrap();
        prop_assert!(defect < 1e-10, "defect {defect}");
    }
}

#[test]
fn undamped_limit_over_grid() {
    for k in 0..=1000 {
        let omega_tau = 20.0 * PI * f64::from(k) / 1000.0;
        let r = derive_rates(&damped(omega_tau, 1e-3, 0.0, 0.0, 1.0, 1.0)).unwrap();
        let want = (omega_tau / 2.0).cos().powi(2);
        assert!((r.p0 - want).abs() < 1e-12, "Ωτ = {omega_tau}: {} vs {want}", r.p0);
    }
}

#[test]
fn coherent_survival_period_two_at_pi() {
    for q in 0..50 {
        assert!((coherent_survival(PI, q + 2) - coherent_survival(PI, q)).abs() < 1e-12);
    }
    assert!((coherent_survival(TAU, 7) - 1.0).abs() < 1e-12);
}

#[test]
fn reference_example_values() {
    let r = derive_rates(&damped(TAU, 0.002, 200.0, 300.0, 0.5, 1.0)).unwrap();
    assert!((r.a - 0.4).abs() < 1e-12);
    assert!((r.b - 0.2).abs() < 1e-12);
    assert!((r.theta - (4.0 * PI * PI - 0.04_f64).sqrt()).abs() < 1e-12);
    assert!((r.p0 - 0.888).abs() < 1e-3);
}
