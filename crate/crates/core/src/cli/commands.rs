use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::bloch::{detuning_grid, excitation_after_pulse};
use crate::cli::config::{ConfigError, RunConfig};
use crate::cli::format::{read_trajectory_file, significant, write_trajectory_file};
use crate::cli::{mode_override, Cli, CliError, Command};
use crate::error::ZenoError;
use crate::model::{block_rates, derive_rates, Estimate, MeasurementOutcome, Trajectory};
use crate::protocol::{
    end_to_end_recovery, estimate_from_points, DecayProfile, DeltaBEstimate, ErrorMode, ProtocolPoint, RecoveryConfig,
};
use crate::rng::StreamSeed;
use crate::sim::simulate_ensemble;
use crate::stats::{fit_histograms, normalized_sequence_prob, RunHistogram};

type CliResult<T> = Result<T, CliError>;

const REPORT_DIGITS: usize = 12;
const CSV_DIGITS: usize = 9;

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.global.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.global.seed {
        cfg.seed = seed;
    }
    if let Some(mode) = mode_override(&cli.global) {
        cfg.mode = mode;
    }
    cfg.params.validate()?;
    Ok(cfg)
}

/// Runs the command and returns the text destined for standard output.
pub fn dispatch(cli: &Cli) -> CliResult<String> {
    let cfg = load_config(cli)?;
    let out = cli.global.out.as_deref();
    match &cli.command {
        Command::Derive => emit(out, derive(&cfg)?),
        Command::Simulate => emit(out.or(cfg.trajectory_out.as_deref()), simulate(&cfg)?),
        Command::Spectrum => emit(out.or(cfg.spectrum_out.as_deref()), spectrum(&cfg)?),
        Command::Analyze { trajectories } => {
            let (report, csv) = analyze(&cfg, trajectories)?;
            let csv_path = match out.or(cfg.histogram_out.as_deref()) {
                Some(p) => p.to_path_buf(),
                None => default_histogram_path(trajectories),
            };
            write_file(&csv_path, &csv)?;
            Ok(report)
        }
        Command::ZenoTest => emit(out, zeno_test(&cfg)?),
    }
}

fn default_histogram_path(input: &Path) -> PathBuf {
    let mut name = input.as_os_str().to_owned();
    name.push(".runs.csv");
    PathBuf::from(name)
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path.display().to_string(), e))
}

fn emit(path: Option<&Path>, text: String) -> CliResult<String> {
    match path {
        Some(p) => write_file(p, &text).map(|()| String::new()),
        None => Ok(text),
    }
}

fn kv(out: &mut String, key: &str, v: f64) {
    let _ = writeln!(out, "{key}={}", significant(v, REPORT_DIGITS));
}

fn kv_est(out: &mut String, key: &str, e: Estimate) {
    kv(out, key, e.value);
    kv(out, &format!("{key}_se"), e.standard_error);
}

pub fn derive(cfg: &RunConfig) -> CliResult<String> {
    let mut out = String::new();
    for (k, v) in cfg.echo() {
        let _ = writeln!(out, "{k}={v}");
    }
    let r = block_rates(&cfg.params)?;
    kv(&mut out, "omega_tau", r.omega_tau);
    kv(&mut out, "a", r.a);
    kv(&mut out, "b", r.b);
    kv(&mut out, "gamma_ph", r.phase_diffusion_rate);
    kv(&mut out, "theta", r.theta);
    let _ = writeln!(out, "s={}", r.integer_turns);
    kv(&mut out, "theta_prime", r.fractional_phase);
    kv(&mut out, "B0", r.b0);
    kv(&mut out, "B1", r.b1);
    kv(&mut out, "p0", r.p0);
    kv(&mut out, "p1", r.p1);
    let _ = writeln!(out, "below_validity={}", r.below_validity);
    Ok(out)
}

pub fn simulate(cfg: &RunConfig) -> CliResult<String> {
    let ensemble = simulate_ensemble(&cfg.params, cfg.mode, cfg.trajectories, cfg.seed)?;
    Ok(write_trajectory_file(&ensemble, &cfg.params))
}

pub fn spectrum(cfg: &RunConfig) -> CliResult<String> {
    let range = cfg.spectrum_range()?;
    let grid = detuning_grid(range.min_hz, range.max_hz, range.step_hz)?;
    let values = grid
        .par_iter()
        .map(|&hz| excitation_after_pulse(&cfg.params, hz * TAU))
        .collect::<Result<Vec<_>, ZenoError>>()?;
    let mut out = String::from("detuning_hz,p01\n");
    for (hz, p) in grid.iter().zip(values) {
        let _ = writeln!(out, "{},{}", significant(*hz, CSV_DIGITS), significant(p, CSV_DIGITS));
    }
    Ok(out)
}

/// Fit report and run-histogram CSV for a trajectory file.
pub fn analyze(cfg: &RunConfig, path: &Path) -> CliResult<(String, String)> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path.display().to_string(), e))?;
    let file = read_trajectory_file(&text, cfg.params).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    file.params.validate()?;
    if file.records.is_empty() {
        return Err(ZenoError::InsufficientData("trajectory file holds no records".into()).into());
    }
    let trajectories: Vec<Trajectory> = file
        .records
        .into_iter()
        .enumerate()
        .map(|(i, outcomes)| Trajectory {
            seed: StreamSeed::child(file.master_seed, i as u64),
            params: crate::model::ExperimentParams { measurements_per_trajectory: outcomes.len(), ..file.params },
            outcomes,
        })
        .collect();
    let hists = trajectories
        .iter()
        .map(|t| RunHistogram::from_outcomes(&t.outcomes))
        .collect::<Result<Vec<_>, _>>()?;
    let report = fit_histograms(&trajectories[0], &hists)?;

    let mut out = String::new();
    let _ = writeln!(out, "trajectories={}", trajectories.len());
    kv_est(&mut out, "calibration_repeat_on", report.calibration_repeat_on);
    kv_est(&mut out, "repeat_on", report.repeat_on);
    kv_est(&mut out, "repeat_on_pooled", report.repeat_on_pooled);
    kv_est(&mut out, "repeat_off", report.repeat_off);
    kv_est(&mut out, "total_relaxation", report.total_relaxation);
    kv_est(&mut out, "theta_prime", report.fractional_phase);
    let _ = writeln!(out, "phase_ambiguous={}", report.phase_ambiguous);
    kv_est(&mut out, "mixing", report.mixing);
    match report.goodness_of_fit {
        Some(g) => {
            kv(&mut out, "gof_statistic", g.statistic);
            let _ = writeln!(out, "gof_dof={}", g.degrees_of_freedom);
            kv(&mut out, "gof_p_value", g.p_value);
        }
        None => {
            let _ = writeln!(out, "gof=none");
        }
    }
    for note in &report.notes {
        let _ = writeln!(out, "note={note}");
    }

    let all = RunHistogram::merged(&hists);
    Ok((out, histogram_csv(&all)))
}

fn histogram_csv(h: &RunHistogram) -> String {
    use MeasurementOutcome::{Off, On};
    let on = normalized_sequence_prob(h, On).unwrap_or_default();
    let off = normalized_sequence_prob(h, Off).unwrap_or_default();
    let mut out = String::from("q,on_exact,on_cum,off_exact,off_cum,u_over_u1_on,u_over_u1_off\n");
    for q in 1..=h.max_run_any() {
        let ratio = |m: &std::collections::BTreeMap<u64, f64>| match m.get(&q) {
            Some(&v) => significant(v, CSV_DIGITS),
            None if m.is_empty() => "nan".into(),
            None => "0".into(),
        };
        let _ = writeln!(
            out,
            "{q},{},{},{},{},{},{}",
            h.exact(On, q),
            h.cumulative(On, q),
            h.exact(Off, q),
            h.cumulative(Off, q),
            ratio(&on),
            ratio(&off)
        );
    }
    out
}

/// Protocol rates (1, 2, m) from the configured list.
fn protocol_rates(cfg: &RunConfig) -> CliResult<(u32, u32, u32)> {
    let list = &cfg.protocol_n;
    for (i, n) in list.iter().enumerate() {
        if list[..i].contains(n) {
            return Err(ZenoError::DuplicateN(*n).into());
        }
    }
    let m: Vec<u32> = list.iter().copied().filter(|&n| n != 1 && n != 2).collect();
    if list.len() != 3 || !list.contains(&1) || !list.contains(&2) || m.len() != 1 {
        return Err(ConfigError::Missing(format!(
            "protocol_n must list 1, 2 and one slow rate m, got {list:?}"
        ))
        .into());
    }
    Ok((1, 2, m[0]))
}

pub fn zeno_test(cfg: &RunConfig) -> CliResult<String> {
    let (_, _, m) = protocol_rates(cfg)?;
    let rates = derive_rates(&cfg.params)?;
    let b1 = cfg.profile_b.get(&1).copied().unwrap_or(rates.b);
    let mut out = String::new();
    let (estimate, points, bootstrap) = if cfg.simulate {
        let profile = DecayProfile {
            b1,
            b2: cfg.profile_b.get(&2).copied().unwrap_or(b1),
            bm: cfg.profile_b.get(&m).copied().unwrap_or(b1),
        };
        let error_mode = match cfg.bootstrap_replicas {
            0 => ErrorMode::DeltaMethod,
            replicas => ErrorMode::MonteCarlo { replicas },
        };
        let report = end_to_end_recovery(&RecoveryConfig {
            base: cfg.params,
            a: rates.a,
            profile,
            m,
            trajectories_per_point: cfg.trajectories,
            master_seed: cfg.seed,
            error_mode,
        })?;
        let _ = writeln!(out, "source=simulated");
        (report.estimate, report.points, report.monte_carlo_error)
    } else {
        let omega_tau = cfg.params.omega_tau();
        let point = |n: u32| -> CliResult<ProtocolPoint> {
            let &(theta, sigma) = cfg
                .phases
                .get(&n)
                .ok_or_else(|| ConfigError::Missing(format!("phase_{n} is required unless simulate = true")))?;
            let mut p = ProtocolPoint::unwrap_measured(n, Estimate::new(theta.rem_euclid(TAU), sigma), omega_tau);
            p.b_n = cfg.profile_b.get(&n).copied();
            Ok(p)
        };
        let points = [point(1)?, point(2)?, point(m)?];
        let e = estimate_from_points(&points[0], &points[1], &points[2], Estimate::exact(rates.a - b1))?;
        let _ = writeln!(out, "source=supplied");
        (e, points, None)
    };
    write_protocol_report(&mut out, &estimate, &points, bootstrap);
    Ok(out)
}

fn write_protocol_report(out: &mut String, e: &DeltaBEstimate, points: &[ProtocolPoint], bootstrap: Option<f64>) {
    if let Some(m) = e.m {
        let _ = writeln!(out, "m={m}");
    }
    for p in points {
        let n = p.n;
        kv(out, &format!("theta_prime_{n}"), p.theta_prime.value);
        kv(out, &format!("sigma_theta_prime_{n}"), p.theta_prime.standard_error);
        let _ = writeln!(out, "turns_{n}={}", p.whole_turns);
    }
    kv(out, "a_minus_b1", e.a_minus_b1.value);
    kv(out, "delta_21", e.delta_21.value);
    kv(out, "sigma_delta_21", e.delta_21.standard_error);
    kv(out, "delta_m1", e.delta_m1.value);
    kv(out, "sigma_delta_m1", e.delta_m1.standard_error);
    kv(out, "ratio", e.ratio.value);
    kv(out, "sigma_ratio", e.ratio.standard_error);
    kv(out, "delta_b", e.delta_b);
    kv(out, "sigma_delta_b", e.standard_error);
    if let Some(b) = bootstrap {
        kv(out, "sigma_delta_b_bootstrap", b);
    }
}
