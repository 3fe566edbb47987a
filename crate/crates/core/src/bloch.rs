//! Fixed-step integration of the damped, driven two-level Bloch equations.
//!
//! Rotating-frame form with the ground state at w = +1:
//!
//! ```text
//! du/dt =  Δ v − γ u
//! dv/dt = −Δ u − γ v + Ω w
//! dw/dt = −Ω v − Γ (w − w_eq)
//! ```
//!
//! Drive phase diffusion enters only through γ = γ_ph + Γ/2.

use rayon::prelude::*;

use crate::error::{Result, ZenoError};
use crate::model::{BlochState, ExperimentParams};

/// Largest phase advance per step accepted by [`integrate_bloch`].
pub const MAX_PHASE_PER_STEP: f64 = 0.1;
/// Phase advance per step used by [`default_step`].
pub const DEFAULT_PHASE_PER_STEP: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochOde {
    /// Ω, rad/s.
    pub rabi: f64,
    /// Δ, rad/s.
    pub detuning: f64,
    /// γ, 1/s.
    pub transverse_rate: f64,
    /// Γ, 1/s.
    pub inversion_rate: f64,
    pub equilibrium_inversion: f64,
}

impl BlochOde {
    pub fn new(rabi: f64, detuning: f64, transverse_rate: f64, inversion_rate: f64) -> Self {
        Self { rabi, detuning, transverse_rate, inversion_rate, equilibrium_inversion: 1.0 }
    }

    pub fn undamped(rabi: f64, detuning: f64) -> Self {
        Self::new(rabi, detuning, 0.0, 0.0)
    }

    pub fn from_params(params: &ExperimentParams) -> Self {
        Self::new(
            params.rabi_frequency,
            params.detuning,
            params.transverse_rate(),
            params.inversion_decay_rate,
        )
    }

    /// √(Ω² + Δ²).
    pub fn generalized_rabi(&self) -> f64 {
        self.rabi.hypot(self.detuning)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.rabi, self.detuning, self.transverse_rate, self.inversion_rate, self.equilibrium_inversion];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(ZenoError::InvalidParams("Bloch coefficients must be finite".into()));
        }
        if self.inversion_rate < 0.0 || self.transverse_rate < 0.5 * self.inversion_rate {
            return Err(ZenoError::InvalidParams(format!(
                "need γ ≥ Γ/2 ≥ 0, got γ = {}, Γ = {}",
                self.transverse_rate, self.inversion_rate
            )));
        }
        Ok(())
    }

    fn derivative(&self, s: &BlochState) -> BlochState {
        BlochState {
            u: self.detuning * s.v - self.transverse_rate * s.u,
            v: -self.detuning * s.u - self.transverse_rate * s.v + self.rabi * s.w,
            w: -self.rabi * s.v - self.inversion_rate * (s.w - self.equilibrium_inversion),
        }
    }

    fn rk4_step(&self, s: &BlochState, h: f64) -> BlochState {
        let axpy = |base: &BlochState, k: &BlochState, c: f64| BlochState {
            u: base.u + c * k.u,
            v: base.v + c * k.v,
            w: base.w + c * k.w,
        };
        let k1 = self.derivative(s);
        let k2 = self.derivative(&axpy(s, &k1, 0.5 * h));
        let k3 = self.derivative(&axpy(s, &k2, 0.5 * h));
        let k4 = self.derivative(&axpy(s, &k3, h));
        let c = h / 6.0;
        BlochState {
            u: s.u + c * (k1.u + 2.0 * k2.u + 2.0 * k3.u + k4.u),
            v: s.v + c * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v),
            w: s.w + c * (k1.w + 2.0 * k2.w + 2.0 * k3.w + k4.w),
        }
    }
}

/// Step giving [`DEFAULT_PHASE_PER_STEP`] of rotation (or damping) per step, and
/// at least ten steps over `duration`.
pub fn default_step(ode: &BlochOde, duration: f64) -> f64 {
    let fastest = ode
        .generalized_rabi()
        .max(ode.transverse_rate)
        .max(ode.inversion_rate);
    let by_phase = if fastest > 0.0 { DEFAULT_PHASE_PER_STEP / fastest } else { f64::INFINITY };
    if duration > 0.0 {
        by_phase.min(duration / 10.0)
    } else {
        by_phase.min(1.0)
    }
}

/// Advances `initial` by `duration` with classical fourth-order Runge–Kutta.
///
/// The interval is split into ⌈duration/step⌉ equal steps, so the step actually
/// taken never exceeds `step`.
pub fn integrate_bloch(initial: BlochState, ode: &BlochOde, duration: f64, step: f64) -> Result<BlochState> {
    ode.validate()?;
    if !(step.is_finite() && step > 0.0) {
        return Err(ZenoError::InvalidStep(format!("step must be > 0, got {step}")));
    }
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(ZenoError::InvalidStep(format!("duration must be ≥ 0, got {duration}")));
    }
    if duration > 0.0 && step > duration / 10.0 * (1.0 + 1e-12) {
        return Err(ZenoError::InvalidStep(format!(
            "step {step} exceeds duration/10 = {}",
            duration / 10.0
        )));
    }
    let phase_per_step = step * ode.generalized_rabi();
    if phase_per_step > MAX_PHASE_PER_STEP {
        return Err(ZenoError::StepTooLarge { phase_per_step });
    }
    if duration == 0.0 {
        return Ok(initial);
    }
    let steps = ((duration / step) * (1.0 - 1e-12)).ceil().max(1.0) as u64;
    let h = duration / steps as f64;
    let mut state = initial;
    for _ in 0..steps {
        state = ode.rk4_step(&state, h);
    }
    Ok(state)
}

/// Integration with [`default_step`].
pub fn integrate_bloch_default(initial: BlochState, ode: &BlochOde, duration: f64) -> Result<BlochState> {
    integrate_bloch(initial, ode, duration, default_step(ode, duration))
}

/// Undamped nutation angle θ(t) = √(Ω² + Δ²)·t.
pub fn nutation_angle(rabi: f64, detuning: f64, t: f64) -> f64 {
    rabi.hypot(detuning) * t
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumPoint {
    /// Δ, rad/s.
    pub detuning: f64,
    /// p₀₁ = (1 − w)/2 after one drive pulse from the ground state.
    pub excitation_probability: f64,
}

/// Detuning grid from `min` in steps of `step` up to `max`.
///
/// Points are interpolated between the endpoints so that a range symmetric
/// about zero yields exactly mirrored detunings.
pub fn detuning_grid(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(min.is_finite() && max.is_finite() && min < max) {
        return Err(ZenoError::InvalidParams(format!("need detuning_min < detuning_max, got [{min}, {max}]")));
    }
    if !(step.is_finite() && step > 0.0) {
        return Err(ZenoError::InvalidParams(format!("detuning step must be > 0, got {step}")));
    }
    let span = max - min;
    let intervals = (span / step + 1e-9).floor() as u64;
    let end = min + intervals as f64 * step;
    let end = if (end - max).abs() <= 1e-9 * span { max } else { end };
    if intervals == 0 {
        return Ok(vec![min]);
    }
    let k_total = intervals as f64;
    Ok((0..=intervals)
        .map(|k| {
            let k = k as f64;
            (min * (k_total - k) + end * k) / k_total
        })
        .collect())
}

/// Excitation probability after one drive pulse, sampled across detuning.
pub fn excitation_spectrum(
    params: &ExperimentParams,
    detuning_min: f64,
    detuning_max: f64,
    detuning_step: f64,
) -> Result<Vec<SpectrumPoint>> {
    params.validate()?;
    let grid = detuning_grid(detuning_min, detuning_max, detuning_step)?;
    grid.into_par_iter()
        .map(|detuning| {
            Ok(SpectrumPoint { detuning, excitation_probability: excitation_after_pulse(params, detuning)? })
        })
        .collect()
}

/// p₀₁ after one pulse of `params.drive_duration` from the ground state at detuning Δ (rad/s).
pub fn excitation_after_pulse(params: &ExperimentParams, detuning: f64) -> Result<f64> {
    let ode = BlochOde { detuning, ..BlochOde::from_params(params) };
    let end = integrate_bloch_default(BlochState::GROUND, &ode, params.drive_duration)?;
    Ok(end.excitation_probability().clamp(0.0, 1.0))
}

/// Closed-form undamped Rabi excitation (Ω²/(Ω²+Δ²))·sin²(√(Ω²+Δ²)·t/2).
pub fn rabi_excitation(rabi: f64, detuning: f64, t: f64) -> f64 {
    let general = rabi.hypot(detuning);
    if general == 0.0 {
        return 0.0;
    }
    let s = (general * t / 2.0).sin();
    rabi * rabi / (general * general) * s * s
}
