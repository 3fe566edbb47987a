use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

use proptest::prelude::*;
use rand::Rng;

use zeno_core::stats::{
    chi_square_sf, coherent_run_survival, compare_models, excitation_probability, normalized_sequence_prob, RunHistogram,
};
use zeno_core::{
    derive_rates, simulate_ensemble, simulate_trajectory, ExperimentParams, MeasurementOutcome, SimMode, StreamSeed,
};

use MeasurementOutcome::{Off, On};

fn chain(p_on: f64, p_off: f64, n: usize) -> ExperimentParams {
    // Undamped: p = 1 − f/2·(1 − cos Ωτ); take Ωτ = π/2 and set the factors.
    ExperimentParams {
        ground_branching_factor: 2.0 * (1.0 - p_on),
        metastable_mixing_factor: 2.0 * (1.0 - p_off),
        measurements_per_trajectory: n,
        ..ExperimentParams::undamped(FRAC_PI_2, 1e-3)
    }
}

/// Pooled-bin two-sample chi-square on exact run-length counts.
fn two_sample(a: &BTreeMap<u64, u64>, b: &BTreeMap<u64, u64>) -> (f64, u32) {
    let na: u64 = a.values().sum();
    let nb: u64 = b.values().sum();
    let total = (na + nb) as f64;
    let max = a.keys().chain(b.keys()).max().copied().unwrap_or(1);
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for q in 1..=max {
        acc.0 += *a.get(&q).unwrap_or(&0) as f64;
        acc.1 += *b.get(&q).unwrap_or(&0) as f64;
        let pooled = acc.0 + acc.1;
        if pooled * (na.min(nb) as f64) / total >= 5.0 {
            bins.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 + acc.1 > 0.0 {
        if let Some(last) = bins.last_mut() {
            last.0 += acc.0;
            last.1 += acc.1;
        } else {
            bins.push(acc);
        }
    }
    let stat = bins
        .iter()
        .map(|&(oa, ob)| {
            let ea = (oa + ob) * na as f64 / total;
            let eb = (oa + ob) * nb as f64 / total;
            (oa - ea).powi(2) / ea + (ob - eb).powi(2) / eb
        })
        .sum();
    (stat, bins.len() as u32 - 1)
}

#[test]
fn ensembles_are_pure_functions_of_their_inputs() {
    let params = chain(0.7, 0.6, 300);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| simulate_ensemble(&params, SimMode::AnalyticMarkov, 16, 99).unwrap());
    let b = four.install(|| simulate_ensemble(&params, SimMode::AnalyticMarkov, 16, 99).unwrap());
    assert_eq!(a, b);
    let c = simulate_ensemble(&params, SimMode::AnalyticMarkov, 16, 100).unwrap();
    assert_ne!(a.trajectories[0].outcomes, c.trajectories[0].outcomes);
    // Prefix stability: trajectory i does not depend on the ensemble size.
    let d = simulate_ensemble(&params, SimMode::AnalyticMarkov, 4, 99).unwrap();
    assert_eq!(d.trajectories[..], a.trajectories[..4]);
}

#[test]
fn markov_chain_has_no_second_order_memory() {
    let params = chain(0.7, 0.55, 100_000);
    let t = simulate_trajectory(&params, SimMode::AnalyticMarkov, StreamSeed::new(5, 0)).unwrap();
    let o: Vec<usize> = t.outcomes.iter().map(|&x| x as usize).collect();
    // counts[prev1][prev2][next]
    let mut counts = [[[0f64; 2]; 2]; 2];
    for w in o.windows(3) {
        counts[w[1]][w[0]][w[2]] += 1.0;
    }
    let mut stat = 0.0;
    for table in &counts {
        let rows = [table[0][0] + table[0][1], table[1][0] + table[1][1]];
        let cols = [table[0][0] + table[1][0], table[0][1] + table[1][1]];
        let n = rows[0] + rows[1];
        for r in 0..2 {
            for c in 0..2 {
                let e = rows[r] * cols[c] / n;
                stat += (table[r][c] - e).powi(2) / e;
            }
        }
    }
    let p = chi_square_sf(stat, 2);
    assert!(p > 0.01, "χ² = {stat}, p = {p}");
}

#[test]
fn markov_and_bloch_modes_agree_in_validity_regime() {
    let (a, b) = (0.4, 0.2);
    let theta = 40.0 * PI + 2.0;
    let omega_tau = (theta * theta + (a - b) * (a - b)).sqrt();
    let params = ExperimentParams {
        measurements_per_trajectory: 100_000,
        ground_branching_factor: 1.0,
        ..ExperimentParams::from_relaxation(omega_tau, 2e-3, a, b)
    };
    let markov = simulate_trajectory(&params, SimMode::AnalyticMarkov, StreamSeed::new(11, 0)).unwrap();
    let bloch = simulate_trajectory(&params, SimMode::BlochProjective, StreamSeed::new(12, 0)).unwrap();
    let hm = RunHistogram::from_outcomes(&markov.outcomes).unwrap();
    let hb = RunHistogram::from_outcomes(&bloch.outcomes).unwrap();
    for species in [On, Off] {
        let (stat, dof) = two_sample(hm.runs(species), hb.runs(species));
        let p = chi_square_sf(stat, dof);
        assert!(p > 0.01, "{species}: χ² = {stat} on {dof} dof, p = {p}");
    }
}

#[test]
fn excitation_fraction_estimates_one_minus_p0() {
    let params = chain(0.85, 0.5, 50_000);
    let rates = derive_rates(&params).unwrap();
    let t = simulate_trajectory(&params, SimMode::AnalyticMarkov, StreamSeed::new(3, 1)).unwrap();
    let e = excitation_probability(&t).unwrap();
    assert!(e.z_score(1.0 - rates.p0).abs() < 3.0, "{e:?} vs {}", 1.0 - rates.p0);
}

#[test]
fn standard_error_shrinks_by_root_two_per_doubling() {
    let sizes = [20_000usize, 40_000, 80_000];
    let se: Vec<f64> = sizes
        .iter()
        .map(|&n| {
            let t = simulate_trajectory(&chain(0.8, 0.6, n), SimMode::AnalyticMarkov, StreamSeed::new(8, n as u64)).unwrap();
            RunHistogram::from_outcomes(&t.outcomes).unwrap().repeat_probability(On).unwrap().standard_error
        })
        .collect();
    for w in se.windows(2) {
        let ratio = w[0] / w[1];
        assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.2, "ratio {ratio}");
    }
}

/// Alternating runs whose lengths follow the coherent survival law.
fn coherent_record(omega_tau: f64, n: usize, rng: &mut impl Rng) -> Vec<MeasurementOutcome> {
    let mut out = Vec::with_capacity(n);
    let mut species = On;
    while out.len() < n {
        let u: f64 = rng.random();
        let mut q = 1;
        while coherent_run_survival(omega_tau, q + 1) > u {
            q += 1;
        }
        out.extend(std::iter::repeat_n(species, q as usize));
        species = species.flipped();
    }
    out.truncate(n);
    out
}

#[test]
fn model_comparison_identifies_the_generator() {
    let params = ExperimentParams {
        measurements_per_trajectory: 100_000,
        ..ExperimentParams::undamped(FRAC_PI_2, 1e-3)
    };
    let rates = derive_rates(&params).unwrap();
    let mut right_collapse = 0;
    let mut right_coherent = 0;
    for seed in 0..100u64 {
        let t = simulate_trajectory(&params, SimMode::AnalyticMarkov, StreamSeed::new(seed, 0)).unwrap();
        let cmp = compare_models(&RunHistogram::from_outcomes(&t.outcomes).unwrap(), &rates, On).unwrap();
        right_collapse += usize::from(cmp.prefers_collapse());

        let mut rng = StreamSeed::new(seed, 1).rng();
        let record = coherent_record(FRAC_PI_2, 100_000, &mut rng);
        let cmp = compare_models(&RunHistogram::from_outcomes(&record).unwrap(), &rates, On).unwrap();
        right_coherent += usize::from(!cmp.prefers_collapse());
    }
    assert!(right_collapse >= 95, "collapse preferred in {right_collapse}/100");
    assert!(right_coherent >= 95, "coherent preferred in {right_coherent}/100");
}

fn outcomes() -> impl Strategy<Value = Vec<MeasurementOutcome>> {
    proptest::collection::vec(prop_oneof![Just(On), Just(Off)], 1..400)
}

proptest! {
    #[test]
    fn run_lengths_sum_to_record_length(record in outcomes()) {
        let h = RunHistogram::from_outcomes(&record).unwrap();
        prop_assert!(h.is_conserved());
        prop_assert_eq!(h.total_measurements, record.len() as u64);
    }

    #[test]
    fn normalized_counts_never_increase(record in outcomes()) {
        let h = RunHistogram::from_outcomes(&record).unwrap();
        for species in [On, Off] {
            if let Ok(u) = normalized_sequence_prob(&h, species) {
                let values: Vec<f64> = u.values().copied().collect();
                prop_assert!(values.windows(2).all(|w| w[1] <= w[0]));
                prop_assert_eq!(values[0], 1.0);
            }
        }
    }
}
