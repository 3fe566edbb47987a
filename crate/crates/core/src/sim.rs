//! Single-ion drive/probe trajectories.
//!
//! Every measurement cycle applies `pulses_per_measurement` drive pulses and
//! then an instantaneous projective probe. The ion starts in the ground state,
//! which is not itself recorded as an outcome.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::bloch::{integrate_bloch_default, BlochOde};
use crate::error::{Result, ZenoError};
use crate::model::{block_rates, BlochState, ExperimentParams, MeasurementOutcome, Trajectory};
use crate::rng::StreamSeed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SimMode {
    /// Two-state chain with the closed-form repeat probabilities.
    AnalyticMarkov,
    /// Bloch integration over each drive block, projection at each probe.
    ///
    /// Relaxation acts throughout the nτ block here, whereas the closed form
    /// charges a and b once per block, so the modes only coincide for n = 1.
    BlochProjective,
}

impl SimMode {
    pub const fn as_str(self) -> &'static str {
        match self {
            Self::AnalyticMarkov => "markov",
            Self::BlochProjective => "bloch",
        }
    }
}

impl fmt::Display for SimMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SimMode {
    type Err = ZenoError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "markov" => Ok(Self::AnalyticMarkov),
            "bloch" => Ok(Self::BlochProjective),
            other => Err(ZenoError::InvalidParams(format!("unknown mode {other:?} (expected markov|bloch)"))),
        }
    }
}

/// Probabilities that a probe repeats the previous outcome.
///
/// Projection resets the ion to a pole, so a cycle is fully described by the
/// two repeat probabilities whichever mode produced them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionModel {
    pub stay_on: f64,
    pub stay_off: f64,
}

impl TransitionModel {
    pub fn new(params: &ExperimentParams, mode: SimMode) -> Result<Self> {
        params.validate()?;
        match mode {
            SimMode::AnalyticMarkov => {
                let rates = block_rates(params)?;
                Ok(Self { stay_on: rates.p0, stay_off: rates.p1 })
            }
            SimMode::BlochProjective => {
                if params.ground_branching_factor != 1.0 || params.metastable_mixing_factor != 1.0 {
                    return Err(ZenoError::InvalidParams(
                        "Bloch mode has no Zeeman substructure; it requires f₀ = f₁ = 1".into(),
                    ));
                }
                let ode = BlochOde::from_params(params);
                let block = f64::from(params.pulses_per_measurement) * params.drive_duration;
                let from_on = integrate_bloch_default(BlochState::GROUND, &ode, block)?;
                let from_off = integrate_bloch_default(BlochState::METASTABLE, &ode, block)?;
                Ok(Self {
                    stay_on: from_on.ground_probability().clamp(0.0, 1.0),
                    stay_off: from_off.excitation_probability().clamp(0.0, 1.0),
                })
            }
        }
    }

    pub fn stay_probability(&self, current: MeasurementOutcome) -> f64 {
        match current {
            MeasurementOutcome::On => self.stay_on,
            MeasurementOutcome::Off => self.stay_off,
        }
    }

    /// Draws `count` outcomes, one uniform variate per probe.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<MeasurementOutcome> {
        const SPECIES: [MeasurementOutcome; 2] = [MeasurementOutcome::On, MeasurementOutcome::Off];
        let stay = [self.stay_on, self.stay_off];
        let mut state = 0usize;
        (0..count)
            .map(|_| {
                let u: f64 = rng.random();
                state ^= usize::from(u >= stay[state]);
                SPECIES[state]
            })
            .collect()
    }
}

pub fn simulate_trajectory(params: &ExperimentParams, mode: SimMode, seed: StreamSeed) -> Result<Trajectory> {
    let model = TransitionModel::new(params, mode)?;
    Ok(simulate_with_model(params, &model, seed))
}

/// Trajectory from a precomputed transition model.
pub fn simulate_with_model(params: &ExperimentParams, model: &TransitionModel, seed: StreamSeed) -> Trajectory {
    let mut rng = seed.rng();
    Trajectory {
        outcomes: model.sample(params.measurements_per_trajectory, &mut rng),
        seed,
        params: *params,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub trajectories: Vec<Trajectory>,
    pub master_seed: u64,
    pub mode: SimMode,
}

/// `count` trajectories; trajectory `i` uses stream `i` of `master_seed`.
///
/// Output depends only on the arguments, never on the rayon pool in use.
pub fn simulate_ensemble(
    params: &ExperimentParams,
    mode: SimMode,
    count: usize,
    master_seed: u64,
) -> Result<EnsembleResult> {
    if count == 0 {
        return Err(ZenoError::InvalidParams("ensemble count must be ≥ 1".into()));
    }
    let model = TransitionModel::new(params, mode)?;
    let trajectories = (0..count as u64)
        .into_par_iter()
        .map(|i| simulate_with_model(params, &model, StreamSeed::child(master_seed, i)))
        .collect();
    Ok(EnsembleResult { trajectories, master_seed, mode })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn frozen_ion_stays_on() {
        let params = ExperimentParams { ground_branching_factor: 1.0, ..ExperimentParams::default() };
        for mode in [SimMode::AnalyticMarkov, SimMode::BlochProjective] {
            let t = simulate_trajectory(&params, mode, StreamSeed::new(3, 0)).unwrap();
            assert_eq!(t.len(), 500);
            assert!(t.outcomes.iter().all(|&o| o == MeasurementOutcome::On));
        }
    }

    #[test]
    fn pi_pulses_alternate() {
        let mut params = ExperimentParams::undamped(PI, 1e-3);
        params.measurements_per_trajectory = 64;
        let t = simulate_trajectory(&params, SimMode::AnalyticMarkov, StreamSeed::new(1, 0)).unwrap();
        assert!(t.to_bit_string().starts_with("1010"));
        for w in t.outcomes.windows(2) {
            assert_ne!(w[0], w[1]);
        }
    }

    #[test]
    fn empirical_repeat_frequency_matches_binomial_band() {
        let omega_tau = 2.0 * 0.8_f64.sqrt().acos();
        let mut params = ExperimentParams::undamped(omega_tau, 1e-3);
        params.measurements_per_trajectory = 100_000;
        let t = simulate_trajectory(&params, SimMode::AnalyticMarkov, StreamSeed::new(11, 0)).unwrap();
        let repeats = t.outcomes.windows(2).filter(|w| w[0] == w[1]).count() as f64;
        let freq = repeats / (t.len() - 1) as f64;
        let sigma = (0.8 * 0.2 / 1e5_f64).sqrt();
        assert!((freq - 0.8).abs() <= 3.0 * sigma, "freq {freq}");
    }

    #[test]
    fn bloch_mode_rejects_branching_factors() {
        let params = ExperimentParams::from_relaxation(PI, 1e-3, 0.0, 0.0);
        assert!(matches!(
            simulate_trajectory(&params, SimMode::BlochProjective, StreamSeed::new(0, 0)),
            Err(ZenoError::InvalidParams(_))
        ));
    }

    #[test]
    fn single_member_ensemble_matches_direct_call() {
        let params = ExperimentParams::undamped(1.0, 1e-3);
        let e = simulate_ensemble(&params, SimMode::AnalyticMarkov, 1, 99).unwrap();
        let t = simulate_trajectory(&params, SimMode::AnalyticMarkov, StreamSeed::child(99, 0)).unwrap();
        assert_eq!(e.trajectories, vec![t]);
        assert!(simulate_ensemble(&params, SimMode::AnalyticMarkov, 0, 99).is_err());
    }

    #[test]
    fn mode_round_trips_through_text() {
        for m in [SimMode::AnalyticMarkov, SimMode::BlochProjective] {
            assert_eq!(m.as_str().parse::<SimMode>().unwrap(), m);
        }
        assert!("jump".parse::<SimMode>().is_err());
    }
}
