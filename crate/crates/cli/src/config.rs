//! Strict experiment configuration schema.

use std::fmt;
use std::path::PathBuf;

use had_dm::density::{MotionState, WeightMethod};
use had_dm::ArrayConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Doa,
    SweepRmse,
    Density,
    DmEval,
    SnrEst,
}

impl Experiment {
    pub fn tag(self) -> &'static str {
        match self {
            Experiment::Doa => "doa",
            Experiment::SweepRmse => "sweep-rmse",
            Experiment::Density => "density",
            Experiment::DmEval => "dm-eval",
            Experiment::SnrEst => "snr-est",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub array: ArraySection,
    #[serde(default)]
    pub scenario: Scenario,
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySection {
    pub n_antennas: usize,
    pub subarray_size: usize,
    /// Element spacing, in the same unit as `wavelength`.
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    #[serde(default = "default_wavelength")]
    pub wavelength: f64,
}

fn default_spacing() -> f64 {
    0.5
}

fn default_wavelength() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    /// Desired user direction; also the emitter direction for the
    /// estimation experiments.
    pub theta_d: f64,
    pub theta_e: f64,
    /// Per-antenna SNR in dB; `null` runs noiseless.
    pub snr_db: Option<f64>,
    pub snr_grid: Vec<f64>,
    pub n_snapshots: usize,
    pub l_amb: usize,
    pub n_trials: usize,
    pub beta: f64,
    /// AN stream count, K when absent.
    pub n_streams: Option<usize>,
    pub n_tds: usize,
    pub n_rts: usize,
    pub snr_tds_db: f64,
    pub snr_rts_db: f64,
    pub weight_method: WeightMethod,
    pub state: MotionState,
    pub n_draws: usize,
    pub bits_per_draw: usize,
    pub noise_snapshots: usize,
    pub snr_snapshots: usize,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            theta_d: 50.0,
            theta_e: 70.0,
            snr_db: Some(10.0),
            snr_grid: vec![-10.0, -5.0, 0.0, 5.0, 10.0, 20.0, 30.0],
            n_snapshots: 64,
            l_amb: 64,
            n_trials: 200,
            beta: 0.9,
            n_streams: None,
            n_tds: 1000,
            n_rts: 10,
            snr_tds_db: -5.0,
            snr_rts_db: -5.0,
            weight_method: WeightMethod::SnrCount,
            state: MotionState::Stable,
            n_draws: 500,
            bits_per_draw: 2000,
            noise_snapshots: 10_000,
            snr_snapshots: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub format: Format,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("results"),
            format: Format::Csv,
        }
    }
}

/// A rejected configuration, located by its dotted field path.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaError {
    pub path: String,
    pub message: String,
}

impl SchemaError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() || self.path == "." {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

/// Applies `path.to.field=value` overrides. The value is parsed as JSON
/// and falls back to a plain string.
pub fn apply_override(root: &mut Value, arg: &str) -> Result<(), SchemaError> {
    let (path, raw) = arg
        .split_once('=')
        .ok_or_else(|| SchemaError::new("--set", format!("expected key=value, got `{arg}`")))?;
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(SchemaError::new("--set", format!("malformed field path `{path}`")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| SchemaError::new(parts[..i].join("."), "not an object"))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("path has at least one segment")
}

/// Typed parse with the failing field path on error.
pub fn parse(value: Value) -> Result<ExperimentConfig, SchemaError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        SchemaError::new(path, e.into_inner().to_string())
    })
}

impl ExperimentConfig {
    pub fn array_config(&self) -> Result<ArrayConfig, SchemaError> {
        let a = &self.array;
        ArrayConfig::with_wavelength(a.n_antennas, a.subarray_size, a.spacing, a.wavelength).map_err(|e| {
            let path = if a.n_antennas == 0 {
                "array.n_antennas"
            } else if a.subarray_size == 0 || a.n_antennas % a.subarray_size != 0 {
                "array.subarray_size"
            } else if !(a.wavelength.is_finite() && a.wavelength > 0.0) {
                "array.wavelength"
            } else {
                "array.spacing"
            };
            SchemaError::new(path, e.to_string())
        })
    }

    pub fn n_streams(&self) -> usize {
        self.scenario.n_streams.unwrap_or(self.array.n_antennas / self.array.subarray_size.max(1))
    }

    /// Every invariant that can be checked without running anything.
    pub fn validate(&self) -> Result<(), SchemaError> {
        self.array_config()?;
        let s = &self.scenario;
        let angle = |path: &str, v: f64| {
            if (0.0..=180.0).contains(&v) {
                Ok(())
            } else {
                Err(SchemaError::new(path, format!("angle {v} outside [0, 180]")))
            }
        };
        let at_least = |path: &str, v: usize, min: usize| {
            if v >= min {
                Ok(())
            } else {
                Err(SchemaError::new(path, format!("must be at least {min}, got {v}")))
            }
        };
        let finite = |path: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(SchemaError::new(path, "must be finite"))
            }
        };
        angle("scenario.theta_d", s.theta_d)?;
        angle("scenario.theta_e", s.theta_e)?;
        if let Some(v) = s.snr_db {
            finite("scenario.snr_db", v)?;
        }
        if s.snr_grid.is_empty() {
            return Err(SchemaError::new("scenario.snr_grid", "must not be empty"));
        }
        for (i, &v) in s.snr_grid.iter().enumerate() {
            finite(&format!("scenario.snr_grid[{i}]"), v)?;
        }
        finite("scenario.snr_tds_db", s.snr_tds_db)?;
        finite("scenario.snr_rts_db", s.snr_rts_db)?;
        if !(0.0..=1.0).contains(&s.beta) {
            return Err(SchemaError::new(
                "scenario.beta",
                format!("power allocation factor {} outside [0, 1]", s.beta),
            ));
        }
        at_least("scenario.n_snapshots", s.n_snapshots, 1)?;
        at_least("scenario.l_amb", s.l_amb, 1)?;
        at_least("scenario.n_trials", s.n_trials, 1)?;
        at_least("scenario.n_tds", s.n_tds, 2)?;
        at_least("scenario.n_rts", s.n_rts, 2)?;
        at_least("scenario.n_draws", s.n_draws, 1)?;
        at_least("scenario.noise_snapshots", s.noise_snapshots, 1)?;
        at_least("scenario.snr_snapshots", s.snr_snapshots, 1)?;
        if s.bits_per_draw < 1000 || s.bits_per_draw % 2 != 0 {
            return Err(SchemaError::new(
                "scenario.bits_per_draw",
                format!("must be even and at least 1000, got {}", s.bits_per_draw),
            ));
        }
        if let Some(ns) = s.n_streams {
            at_least("scenario.n_streams", ns, 1)?;
        }
        if self.experiment == Experiment::SnrEst && s.snr_db.is_none() {
            return Err(SchemaError::new("scenario.snr_db", "snr-est needs a finite SNR"));
        }
        if self.experiment == Experiment::DmEval && s.theta_d == s.theta_e {
            return Err(SchemaError::new("scenario.theta_e", "must differ from theta_d"));
        }
        Ok(())
    }
}
