//! Flat `key = value` run configuration.
//!
//! Rabi frequency, detuning, and the spectrum range are given in Hz and
//! stored in rad/s. Decay rates stay in 1/s.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::PathBuf;

use thiserror::Error;

use crate::cli::format::number;
use crate::model::ExperimentParams;
use crate::sim::SimMode;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: invalid value {value:?} for `{key}`: {reason}")]
    Value { line: usize, key: String, value: String, reason: String },
    #[error("{0}")]
    Missing(String),
}

/// Keys in echo order. `phase_<n>` and `profile_b_<n>` follow, sorted by n.
pub const KEYS: &[&str] = &[
    "rabi_frequency",
    "detuning",
    "drive_duration",
    "inversion_decay_rate",
    "drive_phase_diffusion_rate",
    "probe_duration",
    "ground_branching_factor",
    "metastable_mixing_factor",
    "measurements_per_trajectory",
    "pulses_per_measurement",
    "mode",
    "trajectories",
    "seed",
    "trajectory_out",
    "spectrum_out",
    "histogram_out",
    "spectrum_min",
    "spectrum_max",
    "spectrum_step",
    "protocol_n",
    "simulate",
    "bootstrap_replicas",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumRange {
    pub min_hz: f64,
    pub max_hz: f64,
    pub step_hz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ExperimentParams,
    pub mode: SimMode,
    pub trajectories: usize,
    pub seed: u64,
    pub trajectory_out: Option<PathBuf>,
    pub spectrum_out: Option<PathBuf>,
    pub histogram_out: Option<PathBuf>,
    pub spectrum_min: Option<f64>,
    pub spectrum_max: Option<f64>,
    pub spectrum_step: Option<f64>,
    pub protocol_n: Vec<u32>,
    /// n → (θ′_n, σ).
    pub phases: BTreeMap<u32, (f64, f64)>,
    /// n → b_n.
    pub profile_b: BTreeMap<u32, f64>,
    pub simulate: bool,
    pub bootstrap_replicas: usize,
    echo: Vec<(String, String)>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ExperimentParams::default(),
            mode: SimMode::AnalyticMarkov,
            trajectories: 20,
            seed: 0,
            trajectory_out: None,
            spectrum_out: None,
            histogram_out: None,
            spectrum_min: None,
            spectrum_max: None,
            spectrum_step: None,
            protocol_n: vec![1, 2, 10],
            phases: BTreeMap::new(),
            profile_b: BTreeMap::new(),
            simulate: false,
            bootstrap_replicas: 0,
            echo: Vec::new(),
        }
    }
}

fn rank(key: &str) -> (usize, u32, &str) {
    if let Some(i) = KEYS.iter().position(|k| *k == key) {
        return (i, 0, key);
    }
    let (group, rest) = if let Some(rest) = key.strip_prefix("phase_") {
        (KEYS.len(), rest)
    } else {
        (KEYS.len() + 1, key.strip_prefix("profile_b_").unwrap_or(key))
    };
    (group, rest.parse().unwrap_or(u32::MAX), key)
}

fn indexed(key: &str, prefix: &str) -> Option<u32> {
    let digits = key.strip_prefix(prefix)?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok().filter(|&n| n >= 1)
}

struct Entry<'a> {
    line: usize,
    key: &'a str,
    value: &'a str,
}

impl Entry<'_> {
    fn err(&self, reason: impl Into<String>) -> ConfigError {
        ConfigError::Value {
            line: self.line,
            key: self.key.to_string(),
            value: self.value.to_string(),
            reason: reason.into(),
        }
    }

    fn float(&self) -> Result<f64, ConfigError> {
        let v: f64 = self.value.parse().map_err(|_| self.err("not a number"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.err("must be finite"))
        }
    }

    fn unsigned<T: std::str::FromStr>(&self) -> Result<T, ConfigError> {
        self.value.parse().map_err(|_| self.err("not a non-negative integer"))
    }

    fn path(&self) -> Result<PathBuf, ConfigError> {
        if self.value.is_empty() {
            Err(self.err("empty path"))
        } else {
            Ok(PathBuf::from(self.value))
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax { line, text: raw.to_string() });
            };
            let entry = Entry { line, key: key.trim(), value: value.trim() };
            if entry.key.is_empty() {
                return Err(ConfigError::Syntax { line, text: raw.to_string() });
            }
            if seen.insert(entry.key.to_string(), line).is_some() {
                return Err(ConfigError::DuplicateKey { line, key: entry.key.to_string() });
            }
            let echoed = cfg.apply(&entry)?;
            cfg.echo.push((entry.key.to_string(), echoed));
        }
        cfg.echo.sort_by(|a, b| rank(&a.0).cmp(&rank(&b.0)));
        Ok(cfg)
    }

    /// Stores one entry and returns its parsed value, formatted for echo.
    fn apply(&mut self, e: &Entry) -> Result<String, ConfigError> {
        let p = &mut self.params;
        let shown = match e.key {
            "rabi_frequency" => {
                let v = e.float()?;
                p.rabi_frequency = v * TAU;
                number(v)
            }
            "detuning" => {
                let v = e.float()?;
                p.detuning = v * TAU;
                number(v)
            }
            "drive_duration" => float_into(e, &mut p.drive_duration)?,
            "inversion_decay_rate" => float_into(e, &mut p.inversion_decay_rate)?,
            "drive_phase_diffusion_rate" => float_into(e, &mut p.drive_phase_diffusion_rate)?,
            "probe_duration" => float_into(e, &mut p.probe_duration)?,
            "ground_branching_factor" => float_into(e, &mut p.ground_branching_factor)?,
            "metastable_mixing_factor" => float_into(e, &mut p.metastable_mixing_factor)?,
            "measurements_per_trajectory" => {
                p.measurements_per_trajectory = e.unsigned()?;
                p.measurements_per_trajectory.to_string()
            }
            "pulses_per_measurement" => {
                p.pulses_per_measurement = e.unsigned()?;
                p.pulses_per_measurement.to_string()
            }
            "mode" => {
                self.mode = e.value.parse().map_err(|_| e.err("expected `markov` or `bloch`"))?;
                self.mode.to_string()
            }
            "trajectories" => {
                self.trajectories = e.unsigned()?;
                self.trajectories.to_string()
            }
            "seed" => {
                self.seed = e.unsigned()?;
                self.seed.to_string()
            }
            "trajectory_out" => {
                self.trajectory_out = Some(e.path()?);
                e.value.to_string()
            }
            "spectrum_out" => {
                self.spectrum_out = Some(e.path()?);
                e.value.to_string()
            }
            "histogram_out" => {
                self.histogram_out = Some(e.path()?);
                e.value.to_string()
            }
            "spectrum_min" => opt_float_into(e, &mut self.spectrum_min)?,
            "spectrum_max" => opt_float_into(e, &mut self.spectrum_max)?,
            "spectrum_step" => opt_float_into(e, &mut self.spectrum_step)?,
            "protocol_n" => {
                let list = e
                    .value
                    .split(',')
                    .map(|s| s.trim().parse::<u32>().ok().filter(|&n| n >= 1))
                    .collect::<Option<Vec<_>>>()
                    .ok_or_else(|| e.err("expected a comma-separated list of positive integers"))?;
                self.protocol_n = list;
                self.protocol_n.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
            }
            "simulate" => {
                self.simulate = match e.value {
                    "true" => true,
                    "false" => false,
                    _ => return Err(e.err("expected `true` or `false`")),
                };
                self.simulate.to_string()
            }
            "bootstrap_replicas" => {
                self.bootstrap_replicas = e.unsigned()?;
                self.bootstrap_replicas.to_string()
            }
            key => {
                if let Some(n) = indexed(key, "phase_") {
                    let mut it = e.value.split(',').map(str::trim);
                    let (Some(t), Some(s), None) = (it.next(), it.next(), it.next()) else {
                        return Err(e.err("expected `θ′, σ`"));
                    };
                    let theta: f64 = t.parse().map_err(|_| e.err("θ′ is not a number"))?;
                    let sigma: f64 = s.parse().map_err(|_| e.err("σ is not a number"))?;
                    if !(theta.is_finite() && sigma.is_finite() && sigma >= 0.0) {
                        return Err(e.err("θ′ must be finite and σ ≥ 0"));
                    }
                    self.phases.insert(n, (theta, sigma));
                    format!("{}, {}", number(theta), number(sigma))
                } else if let Some(n) = indexed(key, "profile_b_") {
                    let v = e.float()?;
                    self.profile_b.insert(n, v);
                    number(v)
                } else {
                    return Err(ConfigError::UnknownKey { line: e.line, key: key.to_string() });
                }
            }
        };
        Ok(shown)
    }

    /// Accepted keys and their parsed values in canonical order.
    pub fn echo(&self) -> &[(String, String)] {
        &self.echo
    }

    pub fn spectrum_range(&self) -> Result<SpectrumRange, ConfigError> {
        match (self.spectrum_min, self.spectrum_max, self.spectrum_step) {
            (Some(min_hz), Some(max_hz), Some(step_hz)) => Ok(SpectrumRange { min_hz, max_hz, step_hz }),
            _ => Err(ConfigError::Missing(
                "spectrum needs spectrum_min, spectrum_max and spectrum_step".into(),
            )),
        }
    }
}

fn float_into(e: &Entry, slot: &mut f64) -> Result<String, ConfigError> {
    *slot = e.float()?;
    Ok(number(*slot))
}

fn opt_float_into(e: &Entry, slot: &mut Option<f64>) -> Result<String, ConfigError> {
    let v = e.float()?;
    *slot = Some(v);
    Ok(number(v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_converts_frequencies() {
        let cfg = RunConfig::parse("rabi_frequency = 500  # Hz\ndrive_duration=0.002\n\n# comment\nmode = bloch\n")
            .unwrap();
        assert!((cfg.params.omega_tau() - TAU).abs() < 1e-12);
        assert_eq!(cfg.mode, SimMode::BlochProjective);
        assert_eq!(cfg.echo()[0], ("rabi_frequency".to_string(), "500".to_string()));
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::parse("rabi_frquency = 1\n").unwrap_err();
        assert_eq!(err, ConfigError::UnknownKey { line: 1, key: "rabi_frquency".into() });
        assert!(err.to_string().contains("rabi_frquency"));
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(matches!(RunConfig::parse("just words"), Err(ConfigError::Syntax { .. })));
        assert!(matches!(RunConfig::parse("seed = 1\nseed = 2"), Err(ConfigError::DuplicateKey { .. })));
        assert!(matches!(RunConfig::parse("seed = -1"), Err(ConfigError::Value { .. })));
        assert!(matches!(RunConfig::parse("phase_0 = 1, 2"), Err(ConfigError::UnknownKey { .. })));
        assert!(matches!(RunConfig::parse("phase_1 = 1"), Err(ConfigError::Value { .. })));
        assert!(matches!(RunConfig::parse("detuning = nan"), Err(ConfigError::Value { .. })));
    }

    #[test]
    fn echo_order_ignores_file_order() {
        let a = RunConfig::parse("seed = 3\nphase_2 = 1, 0.1\nrabi_frequency = 2\nphase_10 = 3, 0.1\n").unwrap();
        let b = RunConfig::parse("phase_10 = 3, 0.1\nrabi_frequency = 2\nphase_2 = 1, 0.1\nseed = 3\n").unwrap();
        assert_eq!(a.echo(), b.echo());
        assert_eq!(a.echo().last().unwrap().0, "phase_10");
    }
}
