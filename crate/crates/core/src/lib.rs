//! Simulation and analysis of repeated projective measurements on a driven
//! two-level ion: closed-form repeat probabilities, optical Bloch dynamics,
//! Monte-Carlo telegraph records, run-length statistics, and a heterodyne
//! phase protocol for probe-induced changes of the decay rate.

pub mod bloch;
pub mod cli;
pub mod error;
pub mod model;
pub mod protocol;
pub mod qnd;
pub mod rng;
pub mod sim;
pub mod stats;

pub use error::{Result, ZenoError};
pub use model::{
    block_rates, derive_rates, regime_check, BlochState, DerivedRates, Estimate, ExperimentParams, MeasurementOutcome,
    RegimeReport, Trajectory,
};
pub use rng::StreamSeed;
pub use sim::{simulate_ensemble, simulate_trajectory, EnsembleResult, SimMode, TransitionModel};
