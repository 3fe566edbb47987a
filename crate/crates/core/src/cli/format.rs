//! Number formatting and the trajectory file format.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use crate::model::{ExperimentParams, MeasurementOutcome};
use crate::sim::{EnsembleResult, SimMode};

pub const TRAJECTORY_FORMAT: &str = "zeno-traj/1";

/// Shortest decimal that round-trips `v`, switching to exponent form outside [1e-5, 1e15).
pub fn number(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let a = v.abs();
    if (1e-5..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// `v` rounded to `digits` significant digits, then printed by [`number`].
pub fn significant(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return number(v);
    }
    let rounded: f64 = format!("{:.*e}", digits.max(1) - 1, v).parse().unwrap_or(v);
    number(rounded)
}

/// Hz value whose conversion back to rad/s reproduces `angular` exactly, printed as briefly as possible.
pub fn hertz(angular: f64) -> String {
    let hz = angular / TAU;
    (1..=17)
        .filter_map(|d| format!("{:.*e}", d - 1, hz).parse::<f64>().ok())
        .find(|c| c * TAU == angular)
        .map_or_else(|| number(hz), number)
}

fn param_lines(p: &ExperimentParams) -> [(&'static str, String); 10] {
    [
        ("rabi_frequency", hertz(p.rabi_frequency)),
        ("detuning", hertz(p.detuning)),
        ("drive_duration", number(p.drive_duration)),
        ("inversion_decay_rate", number(p.inversion_decay_rate)),
        ("drive_phase_diffusion_rate", number(p.drive_phase_diffusion_rate)),
        ("probe_duration", number(p.probe_duration)),
        ("ground_branching_factor", number(p.ground_branching_factor)),
        ("metastable_mixing_factor", number(p.metastable_mixing_factor)),
        ("measurements_per_trajectory", p.measurements_per_trajectory.to_string()),
        ("pulses_per_measurement", p.pulses_per_measurement.to_string()),
    ]
}

pub fn write_trajectory_file(ensemble: &EnsembleResult, params: &ExperimentParams) -> String {
    let n = params.measurements_per_trajectory;
    let mut out = String::with_capacity(512 + ensemble.trajectories.len() * (n + 1));
    let _ = writeln!(out, "# format={TRAJECTORY_FORMAT}");
    let _ = writeln!(out, "# mode={}", ensemble.mode);
    let _ = writeln!(out, "# master_seed={}", ensemble.master_seed);
    let _ = writeln!(out, "# trajectories={}", ensemble.trajectories.len());
    for (k, v) in param_lines(params) {
        let _ = writeln!(out, "# {k}={v}");
    }
    for t in &ensemble.trajectories {
        out.extend(t.outcomes.iter().map(|o| o.as_char()));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFile {
    pub params: ExperimentParams,
    pub mode: Option<SimMode>,
    pub master_seed: u64,
    pub records: Vec<Vec<MeasurementOutcome>>,
}

/// Parses a trajectory file. Header values override the matching fields of `base`.
pub fn read_trajectory_file(text: &str, base: ExperimentParams) -> Result<TrajectoryFile, String> {
    let mut params = base;
    let mut mode = None;
    let mut master_seed = 0;
    let mut declared = None;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if let Some(header) = line.strip_prefix('#') {
            let header = header.trim();
            if header.is_empty() {
                continue;
            }
            let (k, v) = header
                .split_once('=')
                .ok_or_else(|| format!("line {line_no}: header is not `key=value`"))?;
            let (k, v) = (k.trim(), v.trim());
            let float = || v.parse::<f64>().map_err(|_| format!("line {line_no}: bad number for {k}: {v:?}"));
            let uint = || v.parse::<u64>().map_err(|_| format!("line {line_no}: bad integer for {k}: {v:?}"));
            match k {
                "format" if v == TRAJECTORY_FORMAT => {}
                "format" => return Err(format!("line {line_no}: unsupported format {v:?}")),
                "mode" => mode = Some(v.parse().map_err(|e: crate::error::ZenoError| e.to_string())?),
                "master_seed" => master_seed = uint()?,
                "trajectories" => declared = Some(uint()?),
                "rabi_frequency" => params.rabi_frequency = float()? * TAU,
                "detuning" => params.detuning = float()? * TAU,
                "drive_duration" => params.drive_duration = float()?,
                "inversion_decay_rate" => params.inversion_decay_rate = float()?,
                "drive_phase_diffusion_rate" => params.drive_phase_diffusion_rate = float()?,
                "probe_duration" => params.probe_duration = float()?,
                "ground_branching_factor" => params.ground_branching_factor = float()?,
                "metastable_mixing_factor" => params.metastable_mixing_factor = float()?,
                "measurements_per_trajectory" => params.measurements_per_trajectory = uint()? as usize,
                "pulses_per_measurement" => {
                    params.pulses_per_measurement =
                        u32::try_from(uint()?).map_err(|_| format!("line {line_no}: n out of range"))?
                }
                _ => return Err(format!("line {line_no}: unknown header key `{k}`")),
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let record = line
            .chars()
            .map(MeasurementOutcome::from_char)
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| format!("line {line_no}: records may contain only '0' and '1'"))?;
        records.push(record);
    }
    if let Some(d) = declared {
        if d != records.len() as u64 {
            return Err(format!("header declares {d} trajectories but the file holds {}", records.len()));
        }
    }
    Ok(TrajectoryFile { params, mode, master_seed, records })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_forms() {
        assert_eq!(number(0.4), "0.4");
        assert_eq!(number(-0.0), "0");
        assert_eq!(number(1.0), "1");
        assert_eq!(number(1.6e-7), "1.6e-7");
        assert_eq!(significant(0.1 + 0.2, 12), "0.3");
        assert_eq!(significant(6.280001401620658, 12), "6.28000140162");
        assert_eq!(significant(2.0 / 3.0, 9), "0.666666667");
        assert_eq!(hertz(500.0 * TAU), "500");
        let w = 1234.5678 * TAU;
        assert_eq!(hertz(w).parse::<f64>().unwrap() * TAU, w);
    }

    #[test]
    fn trajectory_round_trip() {
        use crate::sim::simulate_ensemble;
        let params = ExperimentParams { measurements_per_trajectory: 7, ..ExperimentParams::from_relaxation(1.0, 0.01, 0.3, 0.1) };
        let e = simulate_ensemble(&params, SimMode::AnalyticMarkov, 3, 9).unwrap();
        let text = write_trajectory_file(&e, &params);
        let back = read_trajectory_file(&text, ExperimentParams::default()).unwrap();
        assert_eq!(back.records.len(), 3);
        assert_eq!(back.master_seed, 9);
        assert_eq!(back.mode, Some(SimMode::AnalyticMarkov));
        assert_eq!(back.records[1], e.trajectories[1].outcomes);
        assert!((back.params.rabi_frequency - params.rabi_frequency).abs() <= 1e-12 * params.rabi_frequency);
    }

    #[test]
    fn rejects_foreign_characters() {
        assert!(read_trajectory_file("0102\n", ExperimentParams::default()).is_err());
        assert!(read_trajectory_file("# colour=blue\n", ExperimentParams::default()).is_err());
    }
}
