//! Heterodyne nutation-phase protocol for detecting a probe-rate dependent
//! change δb of the decay parameter.
//!
//! Probing after every n-th drive pulse gives a cycle phase
//! θ_n = √(n²(Ωτ)² − (a − b_n)²) = 2πns + θ′_n. Per-pulse phases compared at
//! two probing rates,
//!
//! ```text
//! δ_mn = θ′_m/m − θ′_n/n = (1/Ωτ)((a − b_n)/n)² [1 − (n/m)² (1 + δb/(a − b_n))²],
//! ```
//!
//! isolate δb = b_n − b_m from the much larger common phase.

use std::f64::consts::TAU;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Result, ZenoError};
use crate::model::{block_rates, split_turns, Estimate, ExperimentParams, MeasurementOutcome};
use crate::rng::{derive_key, StreamSeed};
use crate::sim::{simulate_with_model, SimMode, TransitionModel};
use crate::stats::{fit_phase_from_runs, PhaseModel, RunHistogram};

/// Cycle phase θ_n split into whole turns and a fractional part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NutationPhase {
    pub n: u32,
    pub total: f64,
    /// s: whole nutation turns per drive pulse, ⌊θ_n / 2πn⌋.
    pub per_pulse_turns: u64,
    /// ⌊θ_n / 2π⌋.
    pub whole_turns: u64,
    /// θ′_n reduced to [0, 2π).
    pub fractional: f64,
}

pub fn nutation_phase_n(omega_tau: f64, a: f64, b_n: f64, n: u32) -> Result<NutationPhase> {
    if n == 0 {
        return Err(ZenoError::InvalidParams("n must be ≥ 1".into()));
    }
    let area = f64::from(n) * omega_tau;
    let omega_tau_sq = area * area;
    let damping_sq = (a - b_n) * (a - b_n);
    if omega_tau_sq < damping_sq {
        return Err(ZenoError::ImaginaryNutation { omega_tau_sq, damping_sq });
    }
    let total = if a == b_n { area } else { (omega_tau_sq - damping_sq).sqrt() };
    let (whole_turns, fractional) = split_turns(total);
    Ok(NutationPhase {
        n,
        total,
        per_pulse_turns: (total / (TAU * f64::from(n))).floor() as u64,
        whole_turns,
        fractional,
    })
}

/// A measured fractional phase at one probing rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolPoint {
    pub n: u32,
    /// θ′_n ∈ [0, 2π) with its standard error.
    pub theta_prime: Estimate,
    /// Whole turns of θ_n, fixed by the trusted pulse area.
    pub whole_turns: u64,
    pub b_n: Option<f64>,
}

impl ProtocolPoint {
    pub fn from_phase(phase: &NutationPhase, sigma: f64) -> Self {
        Self {
            n: phase.n,
            theta_prime: Estimate::new(phase.fractional, sigma),
            whole_turns: phase.whole_turns,
            b_n: None,
        }
    }

    /// Restores the turn count of a measured θ′_n from the known pulse area:
    /// the count that puts θ_n nearest to nΩτ.
    pub fn unwrap_measured(n: u32, theta_prime: Estimate, omega_tau: f64) -> Self {
        let guess = ((f64::from(n) * omega_tau - theta_prime.value) / TAU).round().max(0.0);
        Self { n, theta_prime, whole_turns: guess as u64, b_n: None }
    }

    pub fn total_phase(&self) -> f64 {
        TAU * self.whole_turns as f64 + self.theta_prime.value
    }

    /// θ_n / n.
    pub fn per_pulse_phase(&self) -> f64 {
        self.total_phase() / f64::from(self.n)
    }

    pub fn per_pulse_turns(&self) -> u64 {
        (self.total_phase() / (TAU * f64::from(self.n))).floor() as u64
    }

    fn per_pulse_sigma(&self) -> f64 {
        self.theta_prime.standard_error / f64::from(self.n)
    }
}

/// δ_mn = θ′_m/m − θ′_n/n from two measured points, with independent errors.
pub fn heterodyne_delta(point_m: &ProtocolPoint, point_n: &ProtocolPoint) -> Result<Estimate> {
    if point_m.n == point_n.n {
        return Err(ZenoError::DuplicateN(point_m.n));
    }
    let value = point_m.per_pulse_phase() - point_n.per_pulse_phase();
    let sigma = point_m.per_pulse_sigma().hypot(point_n.per_pulse_sigma());
    Ok(Estimate::new(value, sigma))
}

/// Right-hand side of the δ_mn relation, evaluated as written.
pub fn model_delta(omega_tau: f64, a: f64, b_n: f64, delta_b: f64, m: u32, n: u32) -> Result<f64> {
    if omega_tau.is_nan() || omega_tau <= 0.0 {
        return Err(ZenoError::InvalidParams(format!("Ωτ must be > 0, got {omega_tau}")));
    }
    if m == 0 || n == 0 {
        return Err(ZenoError::InvalidParams("m and n must be ≥ 1".into()));
    }
    let c = a - b_n;
    if c == 0.0 {
        return if delta_b == 0.0 { Ok(0.0) } else { Err(ZenoError::DegenerateDamping) };
    }
    let (m, n) = (f64::from(m), f64::from(n));
    let scaled = c / n;
    let correction = (n / m) * (n / m) * (1.0 + delta_b / c) * (1.0 + delta_b / c);
    Ok(scaled * scaled * (1.0 - correction) / omega_tau)
}

/// θ_m/m − θ_n/n from the unexpanded cycle phases.
pub fn exact_delta(omega_tau: f64, a: f64, b_n: f64, b_m: f64, m: u32, n: u32) -> Result<f64> {
    let pm = nutation_phase_n(omega_tau, a, b_m, m)?;
    let pn = nutation_phase_n(omega_tau, a, b_n, n)?;
    Ok(pm.total / f64::from(m) - pn.total / f64::from(n))
}

/// d(δ₂₁/δ_m1)/dδb at δb = 0, i.e. −1/(2(a − b₁)).
pub fn ratio_slope(a_minus_b1: f64) -> f64 {
    -0.5 / a_minus_b1
}

/// δ₂₁/δ_m1 predicted for a given δb: 1 − ¼(1 + δb/(a − b₁))².
pub fn model_ratio(delta_b: f64, a_minus_b1: f64) -> f64 {
    let x = 1.0 + delta_b / a_minus_b1;
    1.0 - 0.25 * x * x
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaBEstimate {
    pub delta_b: f64,
    pub standard_error: f64,
    /// δ₂₁/δ_m1 after any finite-m correction.
    pub ratio: Estimate,
    pub delta_21: Estimate,
    pub delta_m1: Estimate,
    pub a_minus_b1: Estimate,
    /// Slow probing rate used for δ_m1; `None` means the m → ∞ limit.
    pub m: Option<u32>,
}

/// δb = (a − b₁)(2√(1 − r) − 1) with first-order error propagation.
pub fn delta_b_from_ratio(ratio: Estimate, a_minus_b1: Estimate) -> Result<Estimate> {
    if a_minus_b1.value.is_nan() || a_minus_b1.value <= 0.0 {
        return Err(ZenoError::InvalidParams(format!("a − b₁ must be > 0, got {}", a_minus_b1.value)));
    }
    let rest = 1.0 - ratio.value;
    if rest < 0.0 || rest.is_nan() {
        return Err(ZenoError::OutOfBranch { ratio: ratio.value });
    }
    let root = rest.sqrt();
    let value = a_minus_b1.value * (2.0 * root - 1.0);
    let d_ratio = if ratio.standard_error == 0.0 { 0.0 } else { a_minus_b1.value / root };
    let d_scale = 2.0 * root - 1.0;
    let se = (d_ratio * ratio.standard_error).hypot(d_scale * a_minus_b1.standard_error);
    Ok(Estimate::new(value, se))
}

/// Inverts the (n = 1, m = 2) relation for δb.
///
/// `covariance` is cov(δ₂₁, δ_m1); the two share θ′₁, so it is σ²(θ′₁) when
/// both are built from the same n = 1 point. With `m` given, δ_m1 is rescaled
/// by 1/(1 − 1/m²) to its m → ∞ value.
pub fn estimate_delta_b(
    delta_21: Estimate,
    delta_m1: Estimate,
    covariance: f64,
    a_minus_b1: Estimate,
    m: Option<u32>,
) -> Result<DeltaBEstimate> {
    if delta_m1.value == 0.0 {
        return Err(ZenoError::InvalidParams("δ_m1 must be nonzero".into()));
    }
    let scale = match m {
        Some(m) if m >= 2 => 1.0 / (1.0 - 1.0 / (f64::from(m) * f64::from(m))),
        Some(m) => return Err(ZenoError::InvalidParams(format!("m must be at least 2, got {m}"))),
        None => 1.0,
    };
    let limit = delta_m1.value * scale;
    let r = delta_21.value / limit;
    // r = N/D: ∂r/∂N = 1/D, ∂r/∂D = −r/D.
    let g_num = 1.0 / limit;
    let g_den = -r / limit;
    let s_den = delta_m1.standard_error * scale;
    let var = (g_num * delta_21.standard_error).powi(2)
        + (g_den * s_den).powi(2)
        + 2.0 * g_num * g_den * covariance * scale;
    let ratio = Estimate::new(r, var.max(0.0).sqrt());
    let db = delta_b_from_ratio(ratio, a_minus_b1)?;
    Ok(DeltaBEstimate {
        delta_b: db.value,
        standard_error: db.standard_error,
        ratio,
        delta_21,
        delta_m1,
        a_minus_b1,
        m,
    })
}

/// δb from measured points at n = 1, n = 2, and a slow rate m.
pub fn estimate_from_points(
    p1: &ProtocolPoint,
    p2: &ProtocolPoint,
    pm: &ProtocolPoint,
    a_minus_b1: Estimate,
) -> Result<DeltaBEstimate> {
    if p1.n != 1 || p2.n != 2 {
        return Err(ZenoError::InvalidParams(format!(
            "expected points at n = 1 and n = 2, got {} and {}",
            p1.n, p2.n
        )));
    }
    if pm.n == 1 || pm.n == 2 {
        return Err(ZenoError::DuplicateN(pm.n));
    }
    let d21 = heterodyne_delta(p2, p1)?;
    let dm1 = heterodyne_delta(pm, p1)?;
    let shared = p1.per_pulse_sigma().powi(2);
    estimate_delta_b(d21, dm1, shared, a_minus_b1, Some(pm.n))
}

/// No-transition probability cos^{2N}(ΩT/2N) under N equally spaced projections.
pub fn ideal_zeno_survival(total_angle: f64, projections: u64) -> f64 {
    assert!(projections >= 1, "need at least one projection");
    // cos² = 1 − sin²; ln_1p keeps the tiny per-step loss when N is large.
    let s = (total_angle / (2.0 * projections as f64)).sin();
    (projections as f64 * (-s * s).ln_1p()).exp()
}

/// Decay parameter at each probing rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayProfile {
    pub b1: f64,
    pub b2: f64,
    pub bm: f64,
}

impl DecayProfile {
    pub fn uniform(b: f64) -> Self {
        Self { b1: b, b2: b, bm: b }
    }

    /// b₂ = b_m = b₁ − δb.
    pub fn shifted(b1: f64, delta_b: f64) -> Self {
        Self { b1, b2: b1 - delta_b, bm: b1 - delta_b }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMode {
    DeltaMethod,
    /// Parametric bootstrap over the fitted phases.
    MonteCarlo { replicas: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryConfig {
    /// Drive, timing, f₀ and record length; its relaxation rates are replaced per point.
    pub base: ExperimentParams,
    pub a: f64,
    pub profile: DecayProfile,
    pub m: u32,
    pub trajectories_per_point: usize,
    pub master_seed: u64,
    pub error_mode: ErrorMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryReport {
    pub estimate: DeltaBEstimate,
    pub points: [ProtocolPoint; 3],
    /// Bootstrap standard error of δb when requested.
    pub monte_carlo_error: Option<f64>,
}

impl RecoveryReport {
    /// Standard error selected by the configured error mode.
    pub fn standard_error(&self) -> f64 {
        self.monte_carlo_error.unwrap_or(self.estimate.standard_error)
    }
}

/// Parameters of the protocol point at `n` with decay parameter `b_n`.
pub fn point_params(base: &ExperimentParams, a: f64, b_n: f64, n: u32) -> ExperimentParams {
    let tau = base.drive_duration;
    ExperimentParams {
        pulses_per_measurement: n,
        inversion_decay_rate: 2.0 * b_n / tau,
        drive_phase_diffusion_rate: (2.0 * a - b_n) / tau,
        ..*base
    }
}

fn simulate_point(config: &RecoveryConfig, n: u32, b_n: f64) -> Result<ProtocolPoint> {
    let params = point_params(&config.base, config.a, b_n, n);
    let rates = block_rates(&params)?;
    let model = TransitionModel::new(&params, SimMode::AnalyticMarkov)?;
    let key = derive_key(config.master_seed, u64::from(n));
    let hist = (0..config.trajectories_per_point as u64)
        .into_par_iter()
        .map(|i| {
            let t = simulate_with_model(&params, &model, StreamSeed::new(key, i));
            RunHistogram::from_outcomes(&t.outcomes)
        })
        .try_fold(RunHistogram::default, |mut acc, h| {
            acc.merge(&h?);
            Ok::<_, ZenoError>(acc)
        })
        .try_reduce(RunHistogram::default, |mut a, b| {
            a.merge(&b);
            Ok(a)
        })?;
    let phase_model = PhaseModel { branching: params.ground_branching_factor, weight: rates.b0 };
    // Relaxation of each point is taken as calibrated; see module docs on identifiability.
    let relaxation = Estimate::exact(rates.a + rates.b);
    let fit = fit_phase_from_runs(&hist, MeasurementOutcome::On, &phase_model, relaxation, rates.fractional_phase)?;
    let mut point = ProtocolPoint::unwrap_measured(n, fit.theta_prime, params.omega_tau());
    point.b_n = Some(b_n);
    Ok(point)
}

/// Simulates the n ∈ {1, 2, m} ensembles, fits their phases, and estimates δb.
///
/// Each ensemble's relaxation e^{−(a+b_n)} is supplied from the profile: at a
/// single resonant setting it cannot be separated from cos θ_n by run
/// statistics alone.
pub fn end_to_end_recovery(config: &RecoveryConfig) -> Result<RecoveryReport> {
    if config.m == 1 || config.m == 2 {
        return Err(ZenoError::DuplicateN(config.m));
    }
    if config.trajectories_per_point == 0 {
        return Err(ZenoError::InvalidParams("trajectories_per_point must be ≥ 1".into()));
    }
    config.base.validate()?;
    let plan = [(1, config.profile.b1), (2, config.profile.b2), (config.m, config.profile.bm)];
    let points = plan
        .par_iter()
        .map(|&(n, b)| simulate_point(config, n, b))
        .collect::<Result<Vec<_>>>()?;
    let points: [ProtocolPoint; 3] = [points[0], points[1], points[2]];
    let a_minus_b1 = Estimate::exact(config.a - config.profile.b1);
    let estimate = estimate_from_points(&points[0], &points[1], &points[2], a_minus_b1)?;

    let monte_carlo_error = match config.error_mode {
        ErrorMode::DeltaMethod => None,
        ErrorMode::MonteCarlo { replicas } => Some(bootstrap_error(&points, a_minus_b1, replicas, config.master_seed)?),
    };
    Ok(RecoveryReport { estimate, points, monte_carlo_error })
}

fn bootstrap_error(points: &[ProtocolPoint; 3], a_minus_b1: Estimate, replicas: usize, seed: u64) -> Result<f64> {
    if replicas < 2 {
        return Err(ZenoError::InvalidParams("bootstrap needs at least 2 replicas".into()));
    }
    let mut rng = StreamSeed::new(derive_key(seed, u64::MAX), 0).rng();
    let mut draws = Vec::with_capacity(replicas);
    for _ in 0..replicas {
        let mut resampled = *points;
        for p in resampled.iter_mut() {
            let sigma = p.theta_prime.standard_error;
            if sigma > 0.0 {
                let normal = Normal::new(p.theta_prime.value, sigma)
                    .map_err(|e| ZenoError::InvalidParams(e.to_string()))?;
                p.theta_prime.value = normal.sample(&mut rng);
            }
        }
        if let Ok(e) = estimate_from_points(&resampled[0], &resampled[1], &resampled[2], a_minus_b1) {
            draws.push(e.delta_b);
        }
    }
    if draws.len() < 2 {
        return Err(ZenoError::OutOfBranch { ratio: f64::NAN });
    }
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
    Ok(var.sqrt())
}
