use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Result, ZenoError};
use crate::model::{coherent_survival, survival_probability, DerivedRates, MeasurementOutcome};
use crate::stats::runs::RunHistogram;

/// Minimum expected count per pooled bin.
pub const MIN_EXPECTED: f64 = 5.0;

/// Cell probabilities at or below this are treated as exactly zero (rounding of cos² near its nodes).
pub const FORBIDDEN_PROBABILITY: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GofRecord {
    pub statistic: f64,
    pub degrees_of_freedom: u32,
    pub p_value: f64,
    pub bins: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelComparison {
    /// Against V(q−1) = p^{q−1}.
    pub collapse: GofRecord,
    /// Against V_coh(q−1) = cos²((q−1)Ωτ/2).
    pub coherent: GofRecord,
}

impl ModelComparison {
    pub fn prefers_collapse(&self) -> bool {
        if self.collapse.p_value != self.coherent.p_value {
            return self.collapse.p_value > self.coherent.p_value;
        }
        self.collapse.statistic <= self.coherent.statistic
    }
}

pub fn chi_square_sf(statistic: f64, dof: u32) -> f64 {
    if statistic.is_infinite() {
        return 0.0;
    }
    if dof == 0 {
        return 1.0;
    }
    ChiSquared::new(f64::from(dof))
        .map(|d| d.sf(statistic).clamp(0.0, 1.0))
        .unwrap_or(f64::NAN)
}

/// Pearson chi-square of the exact run-length counts of `species` against a
/// model run-survival function S(q) = P(run ≥ q), S(1) = 1.
///
/// Run lengths the model forbids (zero probability) but the data contain make
/// the statistic infinite. Remaining bins are pooled left to right until each
/// holds at least [`MIN_EXPECTED`] expected runs; a final short bin joins its
/// left neighbour. The last bin is open-ended and starts one past the longest
/// observed run, so it is always empty in the data.
pub fn run_length_gof(
    hist: &RunHistogram,
    species: MeasurementOutcome,
    survival: impl Fn(u64) -> f64,
    fitted_parameters: u32,
) -> Result<GofRecord> {
    let total = hist.run_count(species);
    if total == 0 {
        return Err(ZenoError::NoRuns(species));
    }
    let runs = total as f64;
    // One cell past the longest observed run, so mass the model puts on longer runs is tested.
    let max = hist.max_run(species).unwrap_or(1) + 1;
    let mut cells: Vec<(f64, f64)> = Vec::with_capacity(max as usize);
    let mut forbidden = false;
    for q in 1..=max {
        let observed = if q == max { hist.cumulative(species, q) } else { hist.exact(species, q) } as f64;
        let prob = if q == max { survival(q) } else { survival(q) - survival(q + 1) };
        let prob = prob.max(0.0);
        if prob <= FORBIDDEN_PROBABILITY && observed > 0.0 {
            forbidden = true;
        }
        cells.push((observed, runs * prob));
    }
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (o, e) in cells {
        acc.0 += o;
        acc.1 += e;
        if acc.1 >= MIN_EXPECTED {
            pooled.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 > 0.0 || acc.1 > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => pooled.push(acc),
        }
    }
    let bins = pooled.len() as u32;
    let statistic = if forbidden {
        f64::INFINITY
    } else {
        pooled
            .iter()
            .map(|&(o, e)| {
                if e > 0.0 {
                    (o - e) * (o - e) / e
                } else if o > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            })
            .sum()
    };
    let dof = bins.saturating_sub(1 + fitted_parameters);
    Ok(GofRecord { statistic, degrees_of_freedom: dof, p_value: chi_square_sf(statistic, dof), bins })
}

/// Survival of a run under the coherent hypothesis, made non-increasing by
/// taking the running minimum of cos²((k−1)Ωτ/2) over k ≤ q.
pub fn coherent_run_survival(omega_tau: f64, q: u64) -> f64 {
    (1..=q).map(|k| coherent_survival(omega_tau, k - 1)).fold(1.0, f64::min)
}

/// Tests observed run lengths of `species` against the collapse and coherent hypotheses.
pub fn compare_models(hist: &RunHistogram, rates: &DerivedRates, species: MeasurementOutcome) -> Result<ModelComparison> {
    let distinct = hist.runs(species).len();
    if distinct < 2 {
        return Err(ZenoError::DegenerateHistogram(format!(
            "{species} runs take {distinct} distinct length(s); need at least 2"
        )));
    }
    let p = rates.repeat_probability(species);
    let omega_tau = rates.omega_tau;
    let collapse = run_length_gof(hist, species, |q| survival_probability(p, q - 1), 0)?;
    let coherent = run_length_gof(hist, species, |q| coherent_run_survival(omega_tau, q), 0)?;
    Ok(ModelComparison { collapse, coherent })
}
