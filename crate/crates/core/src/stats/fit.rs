//! Parameter estimation from run-length statistics.
//!
//! On resonance, a+b and θ′ enter the ground-state repeat probability only via
//! the product e^{−(a+b)} cos θ. [`fit_parameters`] therefore splits an
//! ensemble: the first trajectory calibrates a+b with θ fixed at the value
//! implied by the recorded parameters, and the pooled remainder measures θ′
//! with that relaxation held fixed.

use std::f64::consts::{PI, TAU};

use crate::error::{Result, ZenoError};
use crate::model::{block_rates, Estimate, MeasurementOutcome, Trajectory};
use crate::sim::EnsembleResult;
use crate::stats::gof::{run_length_gof, GofRecord};
use crate::stats::runs::RunHistogram;

/// Root of cos θ′ = c on the half-period that contains `seed`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseRoot {
    pub theta_prime: f64,
    /// The other solution, 2π − θ′, which produces identical statistics.
    pub mirror: f64,
}

fn upper_half(seed: f64) -> bool {
    seed.rem_euclid(TAU) > PI
}

/// Bisection for cos θ = c on [0, π] (or [π, 2π] when `upper`).
fn solve_cos(c: f64, upper: bool) -> Option<f64> {
    if !(-1.0..=1.0).contains(&c) {
        return None;
    }
    let (mut lo, mut hi) = if upper { (PI, TAU) } else { (0.0, PI) };
    let g = |t: f64| t.cos() - c;
    let (mut g_lo, g_hi) = (g(lo), g(hi));
    if g_lo == 0.0 {
        return Some(lo);
    }
    if g_hi == 0.0 {
        return Some(hi);
    }
    if g_lo.signum() == g_hi.signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g_mid = g(mid);
        if g_mid == 0.0 {
            return Some(mid);
        }
        if g_mid.signum() == g_lo.signum() {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Closed-form pieces of the resonant repeat probability of one species.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseModel {
    /// f_i.
    pub branching: f64,
    /// B_i.
    pub weight: f64,
}

impl PhaseModel {
    /// e^{−(a+b)} cos θ implied by a repeat probability.
    pub fn damped_cosine(&self, p: f64) -> f64 {
        1.0 - (1.0 - p) / (self.branching * self.weight)
    }

    fn check(&self) -> Result<()> {
        if self.branching * self.weight > 0.0 {
            Ok(())
        } else {
            Err(ZenoError::NonInvertible("f·B vanishes; repeat probability carries no phase".into()))
        }
    }
}

/// Solves `1 − f·B·(1 − e^{−(a+b)} cos θ′) = p` for θ′ ∈ [0, 2π).
///
/// The branch is the half-period holding `seed`, i.e. the one on which dp/dθ′
/// has the same sign as at the seed.
pub fn invert_fractional_phase(p: f64, model: &PhaseModel, relaxation: f64, seed: f64) -> Result<PhaseRoot> {
    model.check()?;
    let c = model.damped_cosine(p) * relaxation.exp();
    let upper = upper_half(seed);
    let theta_prime = solve_cos(c, upper).ok_or_else(|| {
        ZenoError::NonInvertible(format!("cos θ′ = {c} has no solution for p = {p}"))
    })?;
    let mirror = if theta_prime == 0.0 { 0.0 } else { TAU - theta_prime };
    Ok(PhaseRoot { theta_prime: theta_prime.min(TAU.next_down()), mirror })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseFit {
    pub theta_prime: Estimate,
    /// Both roots lie within three standard errors of each other.
    pub ambiguous: bool,
    /// |cos θ′| came out above 1 by less than three standard errors and was
    /// pinned to the boundary.
    pub clamped: bool,
}

/// Angular distance on the circle.
fn arc(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Fractional phase from the repeat probability `p` given a relaxation estimate.
///
/// Sampling noise can push the implied cos θ′ slightly past ±1; within three
/// standard errors the constrained estimate sits on the boundary, beyond that
/// the inversion fails.
pub fn fit_phase(p: Estimate, model: &PhaseModel, relaxation: Estimate, seed: f64) -> Result<PhaseFit> {
    model.check()?;
    let damping = (-relaxation.value).exp();
    let c = model.damped_cosine(p.value) / damping;
    let sigma_c = ((p.standard_error / (model.branching * model.weight * damping)).powi(2)
        + (c * relaxation.standard_error).powi(2))
    .sqrt();
    let clamped = c.abs() > 1.0;
    let root = if clamped && c.abs() - 1.0 <= 3.0 * sigma_c {
        let theta_prime = if c > 0.0 { 0.0 } else { PI };
        PhaseRoot { theta_prime, mirror: if c > 0.0 { 0.0 } else { PI } }
    } else {
        invert_fractional_phase(p.value, model, relaxation.value, seed)?
    };
    let upper = upper_half(seed);
    let edge = if upper { TAU } else { 0.0 };
    let at = |cc: f64| solve_cos(cc.clamp(-1.0, 1.0), upper).unwrap_or(edge).rem_euclid(TAU);
    let se = if clamped {
        arc(at(c.signum() * (1.0 - sigma_c)), root.theta_prime)
    } else {
        arc(at(c + sigma_c), root.theta_prime).max(arc(at(c - sigma_c), root.theta_prime))
    };
    let ambiguous = arc(root.theta_prime, root.mirror) <= 3.0 * se;
    Ok(PhaseFit { theta_prime: Estimate::new(root.theta_prime, se), ambiguous, clamped })
}

/// Fractional phase from the `species` runs of `hist`.
pub fn fit_phase_from_runs(
    hist: &RunHistogram,
    species: MeasurementOutcome,
    model: &PhaseModel,
    relaxation: Estimate,
    seed: f64,
) -> Result<PhaseFit> {
    fit_phase(hist.repeat_probability(species)?, model, relaxation, seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// p̂₀ from the calibration (first) trajectory.
    pub calibration_repeat_on: Estimate,
    /// p̂₀ pooled over the remaining trajectories.
    pub repeat_on: Estimate,
    /// p̂₀ pooled over every trajectory.
    pub repeat_on_pooled: Estimate,
    /// p̂₁ pooled over every trajectory.
    pub repeat_off: Estimate,
    /// a + b.
    pub total_relaxation: Estimate,
    /// θ′ ∈ [0, 2π).
    pub fractional_phase: Estimate,
    pub phase_ambiguous: bool,
    /// f₁.
    pub mixing: Estimate,
    /// Collapse model against the pooled remaining on-runs, one fitted parameter.
    /// `None` when every run has the same length.
    pub goodness_of_fit: Option<GofRecord>,
    pub notes: Vec<String>,
}

/// Fits a+b, θ′, and f₁ from an ensemble sharing one parameter set.
pub fn fit_parameters(ensemble: &EnsembleResult) -> Result<FitReport> {
    let trajectories = &ensemble.trajectories;
    if trajectories.len() < 2 {
        return Err(ZenoError::InsufficientData(format!(
            "need at least 2 trajectories, got {}",
            trajectories.len()
        )));
    }
    let hists = trajectories
        .iter()
        .map(|t| RunHistogram::from_outcomes(&t.outcomes))
        .collect::<Result<Vec<_>>>()?;
    fit_histograms(&trajectories[0], &hists)
}

/// [`fit_parameters`] on per-trajectory histograms; `reference` supplies the parameters.
pub fn fit_histograms(reference: &Trajectory, hists: &[RunHistogram]) -> Result<FitReport> {
    use MeasurementOutcome::{Off, On};

    if hists.len() < 2 {
        return Err(ZenoError::InsufficientData(format!("need at least 2 trajectories, got {}", hists.len())));
    }
    let params = &reference.params;
    let prior = block_rates(params)?;
    let ground = PhaseModel { branching: params.ground_branching_factor, weight: prior.b0 };
    let metastable_weight = prior.b1;

    let calibration = hists[0].repeat_probability(On)?;
    let rest = RunHistogram::merged(&hists[1..]);
    let all = RunHistogram::merged(hists);
    let repeat_on = rest.repeat_probability(On)?;
    let repeat_off = all.repeat_probability(Off)?;

    // a + b with θ held at its prior.
    let x = ground.damped_cosine(calibration.value);
    let cos_prior = prior.theta.cos();
    let damping = x / cos_prior;
    if !(damping > 0.0 && damping.is_finite()) {
        return Err(ZenoError::NonInvertible(format!(
            "calibration gives e^{{−(a+b)}} = {damping}; expected a positive value"
        )));
    }
    let relaxation_se = calibration.standard_error / (ground.branching * ground.weight * x.abs());
    let total_relaxation = Estimate::new(-damping.ln(), relaxation_se);

    let phase = fit_phase(repeat_on, &ground, total_relaxation, prior.fractional_phase)?;

    // f₁ = f₀B₀(1 − p̂₁) / (B₁(1 − p̂₀)).
    let excite_on = 1.0 - repeat_on.value;
    let excite_off = 1.0 - repeat_off.value;
    if excite_on <= 0.0 || metastable_weight <= 0.0 {
        return Err(ZenoError::NonInvertible("no ground-state excitation observed; f₁ undetermined".into()));
    }
    let mixing_value = ground.branching * ground.weight * excite_off / (metastable_weight * excite_on);
    let rel = ((repeat_off.standard_error / excite_off.max(f64::MIN_POSITIVE)).powi(2)
        + (repeat_on.standard_error / excite_on).powi(2))
    .sqrt();
    let mixing = Estimate::new(mixing_value, mixing_value.abs() * rel);

    let goodness_of_fit = if rest.runs(On).len() >= 2 {
        let p = repeat_on.value;
        Some(run_length_gof(&rest, On, |q| p.powi(q as i32 - 1), 1)?)
    } else {
        None
    };

    let mut notes = Vec::new();
    let n = params.measurements_per_trajectory as u64;
    let longest = hists.iter().map(RunHistogram::max_run_any).max().unwrap_or(0);
    if longest * 10 > n {
        notes.push(format!(
            "longest run ({longest}) exceeds a tenth of the record length ({n}); boundary truncation may bias estimates"
        ));
    }
    if prior.below_validity {
        notes.push("θ < 4π: outside the θ ≫ π regime of the resonant formula".into());
    }
    if phase.clamped {
        notes.push("|cos θ′| exceeded 1 within its error; θ′ pinned to the boundary".into());
    }
    if phase.ambiguous {
        notes.push("θ′ and 2π − θ′ are statistically indistinguishable".into());
    }

    Ok(FitReport {
        calibration_repeat_on: calibration,
        repeat_on,
        repeat_on_pooled: all.repeat_probability(On)?,
        repeat_off,
        total_relaxation,
        fractional_phase: phase.theta_prime,
        phase_ambiguous: phase.ambiguous,
        mixing,
        goodness_of_fit,
        notes,
    })
}

/// Fraction of ground-state outcomes that are followed by a metastable one.
pub fn excitation_probability(trajectory: &Trajectory) -> Result<Estimate> {
    let outcomes = &trajectory.outcomes;
    if outcomes.len() < 2 {
        return Err(ZenoError::InsufficientData("need at least 2 outcomes".into()));
    }
    let mut ground = 0u64;
    let mut excited = 0u64;
    for w in outcomes.windows(2) {
        if w[0] == MeasurementOutcome::On {
            ground += 1;
            if w[1] == MeasurementOutcome::Off {
                excited += 1;
            }
        }
    }
    if ground == 0 {
        return Err(ZenoError::NoGroundOccurrences);
    }
    let n = ground as f64;
    let p = excited as f64 / n;
    Ok(Estimate::new(p, (p * (1.0 - p) / n).sqrt()))
}
