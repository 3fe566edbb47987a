//! Physical parameters of a drive/probe experiment and the closed-form
//! quantities derived from them.
//!
//! The probe is treated as a perfect projective energy measurement, so the
//! only dynamics are the drive pulses between probes. On resonance those
//! pulses reduce to two repeat probabilities:
//!
//! ```text
//! p_i = 1 − f_i B_i (1 − e^{−(a+b)} cos θ)
//! B₀ = (Ω²/2)/(Ω² + Γγ),  B₁ = 1 − B₀,  γ = γ_ph + Γ/2
//! 2a = γ_ph τ + (Γ/2) τ,   2b = Γ τ,     θ² = (Ωτ)² − (a−b)²
//! ```

use std::f64::consts::{PI, TAU};
use std::fmt;

use crate::error::{Result, ZenoError};
use crate::rng::StreamSeed;

/// Physical knobs of one drive/probe experiment. Frequencies are angular (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentParams {
    /// Ω, rad/s.
    pub rabi_frequency: f64,
    /// Δ = ω − ω₀, rad/s.
    pub detuning: f64,
    /// τ, s.
    pub drive_duration: f64,
    /// Γ, 1/s.
    pub inversion_decay_rate: f64,
    /// γ_ph, 1/s.
    pub drive_phase_diffusion_rate: f64,
    /// Bookkeeping only; the probe acts instantaneously.
    pub probe_duration: f64,
    /// f₀.
    pub ground_branching_factor: f64,
    /// f₁.
    pub metastable_mixing_factor: f64,
    /// N, probe outcomes per trajectory.
    pub measurements_per_trajectory: usize,
    /// n, drive pulses between consecutive probes.
    pub pulses_per_measurement: u32,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self {
            rabi_frequency: 0.0,
            detuning: 0.0,
            drive_duration: 1.0,
            inversion_decay_rate: 0.0,
            drive_phase_diffusion_rate: 0.0,
            probe_duration: 0.0,
            ground_branching_factor: 0.5,
            metastable_mixing_factor: 1.0,
            measurements_per_trajectory: 500,
            pulses_per_measurement: 1,
        }
    }
}

impl ExperimentParams {
    /// Resonant, undamped drive with pulse area `omega_tau` over `drive_duration`, f₀ = f₁ = 1.
    pub fn undamped(omega_tau: f64, drive_duration: f64) -> Self {
        Self {
            rabi_frequency: omega_tau / drive_duration,
            drive_duration,
            ground_branching_factor: 1.0,
            metastable_mixing_factor: 1.0,
            ..Self::default()
        }
    }

    /// Resonant drive specified by its dimensionless relaxation parameters.
    ///
    /// Γ = 2b/τ and γ_ph = (2a − b)/τ, so `derive_rates` returns `a` and `b` back.
    pub fn from_relaxation(omega_tau: f64, drive_duration: f64, a: f64, b: f64) -> Self {
        Self {
            rabi_frequency: omega_tau / drive_duration,
            drive_duration,
            inversion_decay_rate: 2.0 * b / drive_duration,
            drive_phase_diffusion_rate: (2.0 * a - b) / drive_duration,
            ..Self::default()
        }
    }

    pub fn omega_tau(&self) -> f64 {
        self.rabi_frequency * self.drive_duration
    }

    /// γ = γ_ph + Γ/2.
    pub fn transverse_rate(&self) -> f64 {
        self.drive_phase_diffusion_rate + 0.5 * self.inversion_decay_rate
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(ZenoError::InvalidParams(msg));
        let finite = [
            ("rabi_frequency", self.rabi_frequency),
            ("detuning", self.detuning),
            ("drive_duration", self.drive_duration),
            ("inversion_decay_rate", self.inversion_decay_rate),
            ("drive_phase_diffusion_rate", self.drive_phase_diffusion_rate),
            ("probe_duration", self.probe_duration),
            ("ground_branching_factor", self.ground_branching_factor),
            ("metastable_mixing_factor", self.metastable_mixing_factor),
        ];
        if let Some((name, v)) = finite.iter().find(|(_, v)| !v.is_finite()) {
            return bad(format!("{name} must be finite, got {v}"));
        }
        if self.rabi_frequency < 0.0 {
            return bad(format!("rabi_frequency must be ≥ 0, got {}", self.rabi_frequency));
        }
        if self.drive_duration <= 0.0 {
            return bad(format!("drive_duration must be > 0, got {}", self.drive_duration));
        }
        if self.inversion_decay_rate < 0.0 {
            return bad(format!(
                "inversion_decay_rate must be ≥ 0, got {}",
                self.inversion_decay_rate
            ));
        }
        if self.drive_phase_diffusion_rate < 0.0 {
            return bad(format!(
                "drive_phase_diffusion_rate must be ≥ 0, got {}",
                self.drive_phase_diffusion_rate
            ));
        }
        if self.probe_duration < 0.0 {
            return bad(format!("probe_duration must be ≥ 0, got {}", self.probe_duration));
        }
        for (name, f) in [
            ("ground_branching_factor", self.ground_branching_factor),
            ("metastable_mixing_factor", self.metastable_mixing_factor),
        ] {
            if !(f > 0.0 && f <= 1.0) {
                return bad(format!("{name} must lie in (0, 1], got {f}"));
            }
        }
        if self.measurements_per_trajectory == 0 {
            return bad("measurements_per_trajectory must be ≥ 1".into());
        }
        if self.pulses_per_measurement == 0 {
            return bad("pulses_per_measurement must be ≥ 1".into());
        }
        Ok(())
    }
}

/// Dimensionless bundle derived from [`ExperimentParams`] for one measurement cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedRates {
    /// Pulse area per measurement cycle, nΩτ.
    pub omega_tau: f64,
    pub pulses: u32,
    pub a: f64,
    pub b: f64,
    /// γ = γ_ph + Γ/2, 1/s.
    pub transverse_rate: f64,
    /// Γ reconstructed as 2b/τ.
    pub inversion_decay_rate: f64,
    /// γ_ph reconstructed as (2a − b)/τ.
    pub phase_diffusion_rate: f64,
    /// Damped nutation phase θ.
    pub theta: f64,
    /// s = ⌊θ/2π⌋.
    pub integer_turns: u64,
    /// θ′ = θ − 2πs, in [0, 2π).
    pub fractional_phase: f64,
    pub b0: f64,
    pub b1: f64,
    pub p0: f64,
    pub p1: f64,
    /// θ < 4π: the resonant formula assumes θ ≫ π.
    pub below_validity: bool,
    /// Δ ≠ 0: the resonant formula ignores detuning.
    pub off_resonance: bool,
}

impl DerivedRates {
    pub fn repeat_probability(&self, species: MeasurementOutcome) -> f64 {
        match species {
            MeasurementOutcome::On => self.p0,
            MeasurementOutcome::Off => self.p1,
        }
    }

    pub fn coherent_weight(&self, species: MeasurementOutcome) -> f64 {
        match species {
            MeasurementOutcome::On => self.b0,
            MeasurementOutcome::Off => self.b1,
        }
    }

    /// e^{−(a+b)}.
    pub fn damping_factor(&self) -> f64 {
        (-(self.a + self.b)).exp()
    }
}

/// Repeat probability of the resonant two-level cycle, `1 − f·B·(1 − e^{−(a+b)} cos θ)`.
pub fn resonant_repeat_probability(branching: f64, weight: f64, relaxation: f64, theta: f64) -> f64 {
    1.0 - branching * weight * (1.0 - (-relaxation).exp() * theta.cos())
}

/// B₀ = (Ω²/2)/(Ω² + Γγ), written in the dimensionless form ((Ωτ)²/2)/((Ωτ)² + 4ab).
///
/// With neither drive nor damping the ratio is 0/0; its Ω → 0⁺ limit (1/2) is used.
pub fn coherent_weight_ground(omega_tau: f64, a: f64, b: f64) -> f64 {
    let drive = omega_tau * omega_tau;
    let damping = 4.0 * a * b;
    if drive + damping == 0.0 {
        0.5
    } else {
        0.5 * drive / (drive + damping)
    }
}

/// Rates for a single drive pulse.
pub fn derive_rates(params: &ExperimentParams) -> Result<DerivedRates> {
    rates_for(params, 1, None)
}

/// Rates for one measurement cycle of `params.pulses_per_measurement` pulses.
///
/// The pulse area scales with n while the relaxation pair (a, b) enters once
/// per cycle: θ_n² = n²(Ωτ)² − (a−b)².
pub fn block_rates(params: &ExperimentParams) -> Result<DerivedRates> {
    rates_for(params, params.pulses_per_measurement, None)
}

/// Block rates with the decay parameter of the cycle overridden to `b_n`
/// while `a` stays at its per-pulse value.
pub fn block_rates_with_decay(params: &ExperimentParams, b_n: f64) -> Result<DerivedRates> {
    rates_for(params, params.pulses_per_measurement, Some(b_n))
}

fn rates_for(params: &ExperimentParams, pulses: u32, b_override: Option<f64>) -> Result<DerivedRates> {
    params.validate()?;
    let tau = params.drive_duration;
    let gamma = params.transverse_rate();
    let gamma_decay = params.inversion_decay_rate;
    let a = 0.5 * gamma * tau;
    let b = b_override.unwrap_or(0.5 * gamma_decay * tau);
    if !(b.is_finite() && b >= 0.0) {
        return Err(ZenoError::InvalidParams(format!("decay parameter b must be ≥ 0, got {b}")));
    }
    let omega_tau = f64::from(pulses) * params.omega_tau();
    let omega_tau_sq = omega_tau * omega_tau;
    let damping_sq = (a - b) * (a - b);
    if omega_tau_sq < damping_sq {
        return Err(ZenoError::ImaginaryNutation { omega_tau_sq, damping_sq });
    }
    let theta = (omega_tau_sq - damping_sq).sqrt();
    let (integer_turns, fractional_phase) = split_turns(theta);

    let b0 = coherent_weight_ground(params.omega_tau(), a, b);
    let b1 = 1.0 - b0;
    let relaxation = a + b;
    let p0 = resonant_repeat_probability(params.ground_branching_factor, b0, relaxation, theta);
    let p1 = resonant_repeat_probability(params.metastable_mixing_factor, b1, relaxation, theta);

    Ok(DerivedRates {
        omega_tau,
        pulses,
        a,
        b,
        transverse_rate: gamma,
        inversion_decay_rate: 2.0 * b / tau,
        phase_diffusion_rate: (2.0 * a - b) / tau,
        theta,
        integer_turns,
        fractional_phase,
        b0,
        b1,
        p0: p0.clamp(0.0, 1.0),
        p1: p1.clamp(0.0, 1.0),
        below_validity: theta < 4.0 * PI,
        off_resonance: params.detuning != 0.0,
    })
}

/// Splits a non-negative phase into whole turns and a remainder in [0, 2π).
pub fn split_turns(theta: f64) -> (u64, f64) {
    let turns = (theta / TAU).floor();
    let mut rest = theta - turns * TAU;
    let mut turns = turns as u64;
    if rest >= TAU {
        rest -= TAU;
        turns += 1;
    }
    if rest < 0.0 {
        rest = 0.0;
    }
    (turns, rest)
}

/// Collapse-model survival V(q) = p^q.
pub fn survival_probability(p: f64, q: u64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p));
    match i32::try_from(q) {
        Ok(q) => p.powi(q),
        Err(_) => p.powf(q as f64),
    }
}

/// Coherent-evolution survival V_coh(q) = cos²(qΩτ/2).
pub fn coherent_survival(omega_tau: f64, q: u64) -> f64 {
    let c = (q as f64 * omega_tau / 2.0).cos();
    c * c
}

/// Ratios that decide whether the probe acts as a good projective measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeReport {
    /// A·Ω_d/Ω_p, evaluated exactly as printed (carries units of a rate).
    pub decay_weighted_drive_ratio: f64,
    /// Ω_p/A.
    pub probe_saturation_ratio: f64,
    /// Ω_d/Ω_p, the dimensionless drive-to-probe ratio.
    pub drive_probe_ratio: f64,
    pub threshold: f64,
    pub good_measurement: bool,
}

pub const DEFAULT_REGIME_THRESHOLD: f64 = 0.1;

pub fn regime_check(drive_rabi: f64, probe_rabi: f64, probe_decay: f64) -> Result<RegimeReport> {
    regime_check_with_threshold(drive_rabi, probe_rabi, probe_decay, DEFAULT_REGIME_THRESHOLD)
}

pub fn regime_check_with_threshold(
    drive_rabi: f64,
    probe_rabi: f64,
    probe_decay: f64,
    threshold: f64,
) -> Result<RegimeReport> {
    for (name, v) in [
        ("drive_rabi", drive_rabi),
        ("probe_rabi", probe_rabi),
        ("probe_decay", probe_decay),
        ("threshold", threshold),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(ZenoError::InvalidParams(format!("{name} must be > 0, got {v}")));
        }
    }
    let decay_weighted_drive_ratio = probe_decay * drive_rabi / probe_rabi;
    let probe_saturation_ratio = probe_rabi / probe_decay;
    Ok(RegimeReport {
        decay_weighted_drive_ratio,
        probe_saturation_ratio,
        drive_probe_ratio: drive_rabi / probe_rabi,
        threshold,
        good_measurement: decay_weighted_drive_ratio < threshold && probe_saturation_ratio < threshold,
    })
}

/// Bloch vector of the driven two-level ion; w = +1 is the ground state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochState {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

impl BlochState {
    pub const GROUND: Self = Self { u: 0.0, v: 0.0, w: 1.0 };
    pub const METASTABLE: Self = Self { u: 0.0, v: 0.0, w: -1.0 };

    pub const fn new(u: f64, v: f64, w: f64) -> Self {
        Self { u, v, w }
    }

    /// Eigenstate pole reached by projecting onto `outcome`.
    pub const fn pole(outcome: MeasurementOutcome) -> Self {
        match outcome {
            MeasurementOutcome::On => Self::GROUND,
            MeasurementOutcome::Off => Self::METASTABLE,
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.u * self.u + self.v * self.v + self.w * self.w
    }

    /// Probability (1 − w)/2 of finding the metastable state.
    pub fn excitation_probability(&self) -> f64 {
        (1.0 - self.w) / 2.0
    }

    /// Probability (1 + w)/2 of finding the ground state.
    pub fn ground_probability(&self) -> f64 {
        (1.0 + self.w) / 2.0
    }
}

/// Result of one probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum MeasurementOutcome {
    /// Ground state; probe light is scattered.
    On = 0,
    /// Metastable state; the ion stays dark.
    Off = 1,
}

impl MeasurementOutcome {
    pub const fn as_char(self) -> char {
        match self {
            Self::On => '0',
            Self::Off => '1',
        }
    }

    pub const fn from_char(c: char) -> Option<Self> {
        match c {
            '0' => Some(Self::On),
            '1' => Some(Self::Off),
            _ => None,
        }
    }

    pub const fn flipped(self) -> Self {
        match self {
            Self::On => Self::Off,
            Self::Off => Self::On,
        }
    }
}

impl fmt::Display for MeasurementOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::On => "on",
            Self::Off => "off",
        })
    }
}

/// Ordered record of every probe outcome of one ion.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub outcomes: Vec<MeasurementOutcome>,
    pub seed: StreamSeed,
    pub params: ExperimentParams,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn to_bit_string(&self) -> String {
        self.outcomes.iter().map(|o| o.as_char()).collect()
    }
}

/// Value with a one-sigma standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub standard_error: f64,
}

impl Estimate {
    pub const fn new(value: f64, standard_error: f64) -> Self {
        Self { value, standard_error }
    }

    pub const fn exact(value: f64) -> Self {
        Self { value, standard_error: 0.0 }
    }

    /// |value − truth| in units of the standard error.
    pub fn z_score(&self, truth: f64) -> f64 {
        (self.value - truth).abs() / self.standard_error
    }
}
