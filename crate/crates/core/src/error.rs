use thiserror::Error;

use crate::model::MeasurementOutcome;

/// Errors produced by the simulation and estimation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ZenoError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("imaginary nutation phase: (Ωτ)² = {omega_tau_sq:.6e} < (a−b)² = {damping_sq:.6e}")]
    ImaginaryNutation { omega_tau_sq: f64, damping_sq: f64 },

    #[error("evolution is not unitary (max |U†U − I| = {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("integration step too large: step·√(Ω²+Δ²) = {phase_per_step:.3e} exceeds 0.1")]
    StepTooLarge { phase_per_step: f64 },

    #[error("invalid integration step: {0}")]
    InvalidStep(String),

    #[error("trajectory is empty")]
    EmptyTrajectory,

    #[error("no runs of species {0:?}")]
    NoRuns(MeasurementOutcome),

    #[error("histogram is degenerate: {0}")]
    DegenerateHistogram(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("relation cannot be inverted: {0}")]
    NonInvertible(String),

    #[error("trajectory has no ground-state outcome before its last position")]
    NoGroundOccurrences,

    #[error("duplicate pulses-per-measurement value n = {0}")]
    DuplicateN(u32),

    #[error("a = b_n with nonzero δb: relative damping change is undefined")]
    DegenerateDamping,

    #[error("δ₂₁/δ_m1 = {ratio} lies outside the invertible branch (ratio must be ≤ 1)")]
    OutOfBranch { ratio: f64 },
}

pub type Result<T> = std::result::Result<T, ZenoError>;
