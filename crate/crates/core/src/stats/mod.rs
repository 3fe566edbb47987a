//! Run-length statistics, model comparison, and parameter fits.

pub mod fit;
pub mod gof;
pub mod runs;

pub use fit::{
    excitation_probability, fit_histograms, fit_parameters, fit_phase, fit_phase_from_runs, invert_fractional_phase,
    FitReport, PhaseFit, PhaseModel, PhaseRoot,
};
pub use gof::{chi_square_sf, coherent_run_survival, compare_models, run_length_gof, GofRecord, ModelComparison};
pub use runs::{normalized_sequence_prob, run_histogram, RunHistogram};
