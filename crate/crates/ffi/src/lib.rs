//! C ABI over `zeno-core`.
//!
//! Every fallible function returns a [`ZenoStatus`]; on failure a message is
//! available from [`zeno_last_error_message`] on the same thread. Ensembles are
//! opaque handles owned by the caller and released with [`zeno_ensemble_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use zeno_core::protocol::{estimate_delta_b, ideal_zeno_survival, model_delta};
use zeno_core::stats::fit_parameters;
use zeno_core::{block_rates, simulate_ensemble, EnsembleResult, Estimate, ExperimentParams, SimMode, ZenoError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZenoStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParams = 2,
    ImaginaryNutation = 3,
    BufferTooSmall = 4,
    InsufficientData = 5,
    OutOfBranch = 6,
    DuplicateN = 7,
    DegenerateDamping = 8,
    NonInvertible = 9,
    IndexOutOfRange = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZenoMode {
    Markov = 0,
    Bloch = 1,
}

/// Experiment parameters; frequencies in rad/s, rates in 1/s, durations in s.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZenoParams {
    pub rabi_frequency: f64,
    pub detuning: f64,
    pub drive_duration: f64,
    pub inversion_decay_rate: f64,
    pub drive_phase_diffusion_rate: f64,
    pub probe_duration: f64,
    pub ground_branching_factor: f64,
    pub metastable_mixing_factor: f64,
    pub measurements_per_trajectory: u64,
    pub pulses_per_measurement: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZenoRates {
    pub omega_tau: f64,
    pub a: f64,
    pub b: f64,
    pub theta: f64,
    pub integer_turns: u64,
    pub fractional_phase: f64,
    pub b0: f64,
    pub b1: f64,
    pub p0: f64,
    pub p1: f64,
    pub below_validity: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZenoEstimate {
    pub value: f64,
    pub standard_error: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZenoFit {
    pub repeat_on: ZenoEstimate,
    pub repeat_off: ZenoEstimate,
    pub total_relaxation: ZenoEstimate,
    pub fractional_phase: ZenoEstimate,
    pub mixing: ZenoEstimate,
    pub phase_ambiguous: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZenoDeltaB {
    pub delta_b: ZenoEstimate,
    pub ratio: ZenoEstimate,
}

/// Simulated telegraph records.
pub struct ZenoEnsemble {
    inner: EnsembleResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &ZenoError) -> ZenoStatus {
    match err {
        ZenoError::ImaginaryNutation { .. } => ZenoStatus::ImaginaryNutation,
        ZenoError::InsufficientData(_)
        | ZenoError::EmptyTrajectory
        | ZenoError::NoRuns(_)
        | ZenoError::DegenerateHistogram(_)
        | ZenoError::NoGroundOccurrences => ZenoStatus::InsufficientData,
        ZenoError::NonInvertible(_) => ZenoStatus::NonInvertible,
        ZenoError::OutOfBranch { .. } => ZenoStatus::OutOfBranch,
        ZenoError::DuplicateN(_) => ZenoStatus::DuplicateN,
        ZenoError::DegenerateDamping => ZenoStatus::DegenerateDamping,
        _ => ZenoStatus::InvalidParams,
    }
}

fn guard(f: impl FnOnce() -> Result<(), ZenoStatus>) -> ZenoStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ZenoStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic");
            ZenoStatus::Panic
        }
    }
}

fn fail(err: ZenoError) -> ZenoStatus {
    set_error(err.to_string());
    status_of(&err)
}

fn null(name: &str) -> ZenoStatus {
    set_error(format!("{name} is null"));
    ZenoStatus::NullPointer
}

impl From<ZenoParams> for ExperimentParams {
    fn from(p: ZenoParams) -> Self {
        Self {
            rabi_frequency: p.rabi_frequency,
            detuning: p.detuning,
            drive_duration: p.drive_duration,
            inversion_decay_rate: p.inversion_decay_rate,
            drive_phase_diffusion_rate: p.drive_phase_diffusion_rate,
            probe_duration: p.probe_duration,
            ground_branching_factor: p.ground_branching_factor,
            metastable_mixing_factor: p.metastable_mixing_factor,
            measurements_per_trajectory: usize::try_from(p.measurements_per_trajectory).unwrap_or(usize::MAX),
            pulses_per_measurement: p.pulses_per_measurement,
        }
    }
}

impl From<ExperimentParams> for ZenoParams {
    fn from(p: ExperimentParams) -> Self {
        Self {
            rabi_frequency: p.rabi_frequency,
            detuning: p.detuning,
            drive_duration: p.drive_duration,
            inversion_decay_rate: p.inversion_decay_rate,
            drive_phase_diffusion_rate: p.drive_phase_diffusion_rate,
            probe_duration: p.probe_duration,
            ground_branching_factor: p.ground_branching_factor,
            metastable_mixing_factor: p.metastable_mixing_factor,
            measurements_per_trajectory: p.measurements_per_trajectory as u64,
            pulses_per_measurement: p.pulses_per_measurement,
        }
    }
}

impl From<Estimate> for ZenoEstimate {
    fn from(e: Estimate) -> Self {
        Self { value: e.value, standard_error: e.standard_error }
    }
}

/// Message describing the last failure on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn zeno_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `out` must be null or point to writable memory for one `ZenoParams`.
#[no_mangle]
pub unsafe extern "C" fn zeno_params_default(out: *mut ZenoParams) -> ZenoStatus {
    if out.is_null() {
        return null("out");
    }
    out.write(ExperimentParams::default().into());
    ZenoStatus::Ok
}

/// Rates for one measurement cycle of `params.pulses_per_measurement` pulses.
///
/// # Safety
/// `params` and `out` must be null or valid for reads and writes respectively.
#[no_mangle]
pub unsafe extern "C" fn zeno_derive_rates(params: *const ZenoParams, out: *mut ZenoRates) -> ZenoStatus {
    if params.is_null() {
        return null("params");
    }
    if out.is_null() {
        return null("out");
    }
    let p: ExperimentParams = params.read().into();
    guard(|| {
        let r = block_rates(&p).map_err(fail)?;
        out.write(ZenoRates {
            omega_tau: r.omega_tau,
            a: r.a,
            b: r.b,
            theta: r.theta,
            integer_turns: r.integer_turns,
            fractional_phase: r.fractional_phase,
            b0: r.b0,
            b1: r.b1,
            p0: r.p0,
            p1: r.p1,
            below_validity: r.below_validity,
        });
        Ok(())
    })
}

/// Simulates `count` trajectories. On success `*out` receives a new handle.
///
/// # Safety
/// `params` must be valid for reads and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn zeno_ensemble_simulate(
    params: *const ZenoParams,
    mode: ZenoMode,
    count: usize,
    master_seed: u64,
    out: *mut *mut ZenoEnsemble,
) -> ZenoStatus {
    if params.is_null() {
        return null("params");
    }
    if out.is_null() {
        return null("out");
    }
    let p: ExperimentParams = params.read().into();
    let mode = match mode {
        ZenoMode::Markov => SimMode::AnalyticMarkov,
        ZenoMode::Bloch => SimMode::BlochProjective,
    };
    guard(|| {
        let inner = simulate_ensemble(&p, mode, count, master_seed).map_err(fail)?;
        out.write(Box::into_raw(Box::new(ZenoEnsemble { inner })));
        Ok(())
    })
}

/// # Safety
/// `ensemble` must be null or a handle from [`zeno_ensemble_simulate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn zeno_ensemble_free(ensemble: *mut ZenoEnsemble) {
    if !ensemble.is_null() {
        drop(Box::from_raw(ensemble));
    }
}

/// Number of trajectories; 0 for a null handle.
///
/// # Safety
/// `ensemble` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn zeno_ensemble_len(ensemble: *const ZenoEnsemble) -> usize {
    ensemble.as_ref().map_or(0, |e| e.inner.trajectories.len())
}

/// Copies the outcomes of trajectory `index` into `buffer` as bytes 0 (on) / 1 (off).
///
/// `*written` receives the trajectory length, also when the buffer is too small.
///
/// # Safety
/// `ensemble` must be a live handle, `buffer` valid for `capacity` bytes, `written` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn zeno_ensemble_outcomes(
    ensemble: *const ZenoEnsemble,
    index: usize,
    buffer: *mut u8,
    capacity: usize,
    written: *mut usize,
) -> ZenoStatus {
    let Some(e) = ensemble.as_ref() else {
        return null("ensemble");
    };
    if written.is_null() {
        return null("written");
    }
    let Some(t) = e.inner.trajectories.get(index) else {
        set_error(format!("trajectory {index} out of range (len {})", e.inner.trajectories.len()));
        return ZenoStatus::IndexOutOfRange;
    };
    written.write(t.outcomes.len());
    if capacity < t.outcomes.len() {
        set_error(format!("buffer holds {capacity} bytes, need {}", t.outcomes.len()));
        return ZenoStatus::BufferTooSmall;
    }
    if t.outcomes.is_empty() {
        return ZenoStatus::Ok;
    }
    if buffer.is_null() {
        return null("buffer");
    }
    let dst = std::slice::from_raw_parts_mut(buffer, t.outcomes.len());
    for (d, o) in dst.iter_mut().zip(&t.outcomes) {
        *d = *o as u8;
    }
    ZenoStatus::Ok
}

/// Fits repeat probabilities, relaxation, θ′ and f₁ from an ensemble.
///
/// # Safety
/// `ensemble` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn zeno_ensemble_fit(ensemble: *const ZenoEnsemble, out: *mut ZenoFit) -> ZenoStatus {
    let Some(e) = ensemble.as_ref() else {
        return null("ensemble");
    };
    if out.is_null() {
        return null("out");
    }
    guard(|| {
        let r = fit_parameters(&e.inner).map_err(fail)?;
        out.write(ZenoFit {
            repeat_on: r.repeat_on.into(),
            repeat_off: r.repeat_off.into(),
            total_relaxation: r.total_relaxation.into(),
            fractional_phase: r.fractional_phase.into(),
            mixing: r.mixing.into(),
            phase_ambiguous: r.phase_ambiguous,
        });
        Ok(())
    })
}

/// Expanded per-pulse phase difference δ_mn.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn zeno_model_delta(
    omega_tau: f64,
    a: f64,
    b_n: f64,
    delta_b: f64,
    m: u32,
    n: u32,
    out: *mut f64,
) -> ZenoStatus {
    if out.is_null() {
        return null("out");
    }
    guard(|| {
        out.write(model_delta(omega_tau, a, b_n, delta_b, m, n).map_err(fail)?);
        Ok(())
    })
}

/// δb from δ₂₁ and δ_m1. `m = 0` takes δ_m1 as its m → ∞ limit.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn zeno_estimate_delta_b(
    delta_21: ZenoEstimate,
    delta_m1: ZenoEstimate,
    covariance: f64,
    a_minus_b1: ZenoEstimate,
    m: u32,
    out: *mut ZenoDeltaB,
) -> ZenoStatus {
    if out.is_null() {
        return null("out");
    }
    let est = |e: ZenoEstimate| Estimate::new(e.value, e.standard_error);
    guard(|| {
        let r = estimate_delta_b(
            est(delta_21),
            est(delta_m1),
            covariance,
            est(a_minus_b1),
            (m != 0).then_some(m),
        )
        .map_err(fail)?;
        out.write(ZenoDeltaB {
            delta_b: ZenoEstimate { value: r.delta_b, standard_error: r.standard_error },
            ratio: r.ratio.into(),
        });
        Ok(())
    })
}

/// cos^{2N}(ΩT/2N); NaN when `projections` is 0.
#[no_mangle]
pub extern "C" fn zeno_ideal_zeno_survival(total_angle: f64, projections: u64) -> f64 {
    if projections == 0 {
        set_error("projections must be ≥ 1");
        return f64::NAN;
    }
    ideal_zeno_survival(total_angle, projections)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_convert_both_ways() {
        let p = ExperimentParams::from_relaxation(1.3, 0.01, 0.4, 0.2);
        let back: ExperimentParams = ZenoParams::from(p).into();
        assert_eq!(back, p);
    }

    #[test]
    fn status_mapping() {
        assert_eq!(status_of(&ZenoError::OutOfBranch { ratio: 2.0 }), ZenoStatus::OutOfBranch);
        assert_eq!(status_of(&ZenoError::EmptyTrajectory), ZenoStatus::InsufficientData);
        assert_eq!(status_of(&ZenoError::InvalidParams(String::new())), ZenoStatus::InvalidParams);
    }
}
