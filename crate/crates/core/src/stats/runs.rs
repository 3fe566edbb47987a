use std::collections::BTreeMap;

use crate::error::{Result, ZenoError};
use crate::model::{Estimate, MeasurementOutcome, Trajectory};

/// Counts of maximal runs of equal outcomes, keyed by exact run length.
///
/// Runs that reach the end of a record are still counted at their observed
/// length; `open_on`/`open_off` remember how many such runs were merged in so
/// estimators can treat them as right-censored.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunHistogram {
    pub on_runs: BTreeMap<u64, u64>,
    pub off_runs: BTreeMap<u64, u64>,
    pub total_measurements: u64,
    pub open_on: u64,
    pub open_off: u64,
}

impl RunHistogram {
    pub fn from_outcomes(outcomes: &[MeasurementOutcome]) -> Result<Self> {
        let Some(&first) = outcomes.first() else {
            return Err(ZenoError::EmptyTrajectory);
        };
        let mut hist = Self { total_measurements: outcomes.len() as u64, ..Self::default() };
        // Dense counts indexed by run length, folded into the maps at the end.
        let mut dense: [Vec<u64>; 2] = [Vec::new(), Vec::new()];
        let mut count = |species: MeasurementOutcome, length: usize| {
            let d = &mut dense[species as usize];
            if d.len() <= length {
                d.resize(length + 1, 0);
            }
            d[length] += 1;
        };
        let mut current = first;
        let mut length = 0usize;
        for &o in outcomes {
            if o == current {
                length += 1;
            } else {
                count(current, length);
                current = o;
                length = 1;
            }
        }
        count(current, length);
        for species in [MeasurementOutcome::On, MeasurementOutcome::Off] {
            let map = hist.runs_mut(species);
            for (q, &c) in dense[species as usize].iter().enumerate() {
                if c > 0 {
                    map.insert(q as u64, c);
                }
            }
        }
        match current {
            MeasurementOutcome::On => hist.open_on = 1,
            MeasurementOutcome::Off => hist.open_off = 1,
        }
        Ok(hist)
    }

    pub fn runs(&self, species: MeasurementOutcome) -> &BTreeMap<u64, u64> {
        match species {
            MeasurementOutcome::On => &self.on_runs,
            MeasurementOutcome::Off => &self.off_runs,
        }
    }

    fn runs_mut(&mut self, species: MeasurementOutcome) -> &mut BTreeMap<u64, u64> {
        match species {
            MeasurementOutcome::On => &mut self.on_runs,
            MeasurementOutcome::Off => &mut self.off_runs,
        }
    }

    pub fn open_runs(&self, species: MeasurementOutcome) -> u64 {
        match species {
            MeasurementOutcome::On => self.open_on,
            MeasurementOutcome::Off => self.open_off,
        }
    }

    /// Number of runs of `species`.
    pub fn run_count(&self, species: MeasurementOutcome) -> u64 {
        self.runs(species).values().sum()
    }

    /// Number of `species` outcomes, Σ q·U_exact(q).
    pub fn occupancy(&self, species: MeasurementOutcome) -> u64 {
        self.runs(species).iter().map(|(q, c)| q * c).sum()
    }

    pub fn max_run(&self, species: MeasurementOutcome) -> Option<u64> {
        self.runs(species).keys().next_back().copied()
    }

    pub fn max_run_any(&self) -> u64 {
        self.max_run(MeasurementOutcome::On)
            .max(self.max_run(MeasurementOutcome::Off))
            .unwrap_or(0)
    }

    /// U(q): runs of length ≥ q.
    pub fn cumulative(&self, species: MeasurementOutcome, q: u64) -> u64 {
        self.runs(species).range(q..).map(|(_, c)| c).sum()
    }

    pub fn exact(&self, species: MeasurementOutcome, q: u64) -> u64 {
        self.runs(species).get(&q).copied().unwrap_or(0)
    }

    /// Σ q·(on + off) equals the number of measurements merged in.
    pub fn is_conserved(&self) -> bool {
        self.occupancy(MeasurementOutcome::On) + self.occupancy(MeasurementOutcome::Off) == self.total_measurements
    }

    /// Accumulates another histogram. Merging is commutative and associative.
    pub fn merge(&mut self, other: &Self) {
        for species in [MeasurementOutcome::On, MeasurementOutcome::Off] {
            let dst = self.runs_mut(species);
            for (&q, &c) in other.runs(species) {
                *dst.entry(q).or_default() += c;
            }
        }
        self.total_measurements += other.total_measurements;
        self.open_on += other.open_on;
        self.open_off += other.open_off;
    }

    pub fn merged<'a>(hists: impl IntoIterator<Item = &'a RunHistogram>) -> Self {
        let mut out = Self::default();
        for h in hists {
            out.merge(h);
        }
        out
    }

    /// Maximum-likelihood repeat probability of `species`, treating runs cut by
    /// the record end as censored.
    ///
    /// Equivalent to counting `species → species` transitions over all
    /// `species` outcomes that have a successor. The standard error is the
    /// inverse square root of the Fisher information of the geometric law.
    pub fn repeat_probability(&self, species: MeasurementOutcome) -> Result<Estimate> {
        let occupancy = self.occupancy(species);
        let runs = self.run_count(species);
        let trials = occupancy - self.open_runs(species);
        if trials == 0 {
            return Err(ZenoError::InsufficientData(format!(
                "no {species} outcome is followed by another probe"
            )));
        }
        let repeats = occupancy - runs;
        let n = trials as f64;
        let p = repeats as f64 / n;
        // Variance evaluated away from the boundary so p̂ ∈ {0, 1} keeps a finite error.
        let p_var = p.clamp(0.5 / n, 1.0 - 0.5 / n);
        Ok(Estimate::new(p, (p_var * (1.0 - p_var) / n).sqrt()))
    }
}

pub fn run_histogram(trajectory: &Trajectory) -> Result<RunHistogram> {
    RunHistogram::from_outcomes(&trajectory.outcomes)
}

/// U(q)/U(1) for q = 1 up to the longest observed run, with U counting runs of length ≥ q.
pub fn normalized_sequence_prob(hist: &RunHistogram, species: MeasurementOutcome) -> Result<BTreeMap<u64, f64>> {
    let total = hist.run_count(species);
    if total == 0 {
        return Err(ZenoError::NoRuns(species));
    }
    let max = hist.max_run(species).unwrap_or(0);
    let mut remaining = total;
    let mut out = BTreeMap::new();
    for q in 1..=max {
        out.insert(q, remaining as f64 / total as f64);
        remaining -= hist.exact(species, q);
    }
    Ok(out)
}
