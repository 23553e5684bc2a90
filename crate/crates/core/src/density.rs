//! Maximum-likelihood learning of the DOA mean and measurement-error
//! variance from a training set (TDS) and a real-time set (RTS), and the
//! truncated Gaussian error density consumed by the robust beamformer.
//!
//! Angles are in degrees and variances in degrees² throughout this module.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::array::ArrayConfig;
use crate::error::{Error, Result};
use crate::special::erf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum SetLabel {
    Tds,
    Rts,
}

impl fmt::Display for SetLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SetLabel::Tds => "TDS",
            SetLabel::Rts => "RTS",
        })
    }
}

impl FromStr for SetLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "TDS" => Ok(SetLabel::Tds),
            "RTS" => Ok(SetLabel::Rts),
            other => Err(Error::Parse(format!("unknown set label `{other}`"))),
        }
    }
}

/// Repeated DOA measurements taken at one receive SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub values: Vec<f64>,
    /// Estimated receive SNR (linear) while the set was collected.
    pub snr_hat: f64,
    pub label: SetLabel,
}

impl MeasurementSet {
    pub fn new(values: Vec<f64>, snr_hat: f64, label: SetLabel) -> Result<Self> {
        if !(snr_hat.is_finite() && snr_hat > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "{label} SNR estimate must be positive, got {snr_hat}"
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "{label} contains a non-finite angle {v}"
            )));
        }
        Ok(Self {
            values,
            snr_hat,
            label,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Writes `# label=<L>,snr_hat=<ρ̂>`, an `angle_deg` header, then one
    /// angle per line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# label={},snr_hat={:e}", self.label, self.snr_hat)?;
        writeln!(out, "angle_deg")?;
        for v in &self.values {
            writeln!(out, "{v:e}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let meta = lines
            .next()
            .ok_or_else(|| Error::Parse("empty measurement file".into()))??;
        let meta = meta
            .strip_prefix('#')
            .ok_or_else(|| Error::Parse("missing `# label=...,snr_hat=...` line".into()))?;
        let mut label = None;
        let mut snr_hat = None;
        for field in meta.split(',') {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("malformed header field `{field}`")))?;
            match key.trim() {
                "label" => label = Some(value.parse::<SetLabel>()?),
                "snr_hat" => {
                    snr_hat = Some(value.trim().parse::<f64>().map_err(|e| {
                        Error::Parse(format!("snr_hat `{}`: {e}", value.trim()))
                    })?)
                }
                other => return Err(Error::Parse(format!("unknown header key `{other}`"))),
            }
        }
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("missing `angle_deg` header".into()))??;
        if header.trim() != "angle_deg" {
            return Err(Error::Parse(format!("expected `angle_deg`, got `{header}`")));
        }
        let mut values = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            values.push(line.trim().parse::<f64>().map_err(|e| {
                Error::Parse(format!("line {}: `{}`: {e}", i + 3, line.trim()))
            })?);
        }
        Self::new(
            values,
            snr_hat.ok_or_else(|| Error::Parse("header lacks snr_hat".into()))?,
            label.ok_or_else(|| Error::Parse("header lacks label".into()))?,
        )
    }
}

pub fn sample_mean(set: &MeasurementSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    Ok(set.values.iter().sum::<f64>() / set.len() as f64)
}

/// Unbiased sample variance, divisor n-1.
pub fn sample_variance(set: &MeasurementSet) -> Result<f64> {
    if set.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: set.len(),
        });
    }
    let mean = sample_mean(set)?;
    let ss: f64 = set.values.iter().map(|v| (v - mean).powi(2)).sum();
    Ok(ss / (set.len() - 1) as f64)
}

/// Convex TDS/RTS weighting rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WeightMethod {
    /// Weights proportional to the estimated SNRs.
    #[serde(rename = "I")]
    Snr,
    /// Weights proportional to the set sizes.
    #[serde(rename = "II")]
    Count,
    /// Weights proportional to SNR × set size.
    #[serde(rename = "III")]
    SnrCount,
}

impl WeightMethod {
    pub const ALL: [WeightMethod; 3] = [WeightMethod::Snr, WeightMethod::Count, WeightMethod::SnrCount];

    pub fn tag(&self) -> &'static str {
        match self {
            WeightMethod::Snr => "I",
            WeightMethod::Count => "II",
            WeightMethod::SnrCount => "III",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotionState {
    /// The desired user stays on its direction; both sets share the mean.
    Stable,
    /// The desired user moves; only the RTS mean is current.
    Moving,
}

/// `(α₁, α₂)` for the given rule; α₂ = 1 − α₁.
pub fn weight_factors(
    method: WeightMethod,
    snr_tds: f64,
    snr_rts: f64,
    n_tds: usize,
    n_rts: usize,
) -> Result<(f64, f64)> {
    if !(snr_tds > 0.0 && snr_rts > 0.0 && snr_tds.is_finite() && snr_rts.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "SNR estimates must be positive, got TDS={snr_tds}, RTS={snr_rts}"
        )));
    }
    if n_tds == 0 || n_rts == 0 {
        return Err(Error::InvalidArgument(format!(
            "set sizes must be positive, got TDS={n_tds}, RTS={n_rts}"
        )));
    }
    let (a, b) = match method {
        WeightMethod::Snr => (snr_tds, snr_rts),
        WeightMethod::Count => (n_tds as f64, n_rts as f64),
        WeightMethod::SnrCount => (snr_tds * n_tds as f64, snr_rts * n_rts as f64),
    };
    let alpha1 = a / (a + b);
    Ok((alpha1, 1.0 - alpha1))
}

fn set_weights(tds: &MeasurementSet, rts: &MeasurementSet, method: WeightMethod) -> Result<(f64, f64)> {
    weight_factors(method, tds.snr_hat, rts.snr_hat, tds.len(), rts.len())
}

/// `θ̂_ML = α₁·mean(TDS) + α₂·mean(RTS)`; the moving state forces (0, 1).
pub fn combine_mean(
    tds: &MeasurementSet,
    rts: &MeasurementSet,
    method: WeightMethod,
    state: MotionState,
) -> Result<f64> {
    let mean_rts = sample_mean(rts)?;
    let mean_tds = sample_mean(tds)?;
    let (a1, a2) = match state {
        MotionState::Moving => return Ok(mean_rts),
        MotionState::Stable => set_weights(tds, rts, method)?,
    };
    Ok(a1 * mean_tds + a2 * mean_rts)
}

/// Brings the training variance to the RTS SNR: `(ρ̂_TDS/ρ̂_RTS)·σ̂²_TDS`.
pub fn rescale_tds_variance(var_tds: f64, snr_tds: f64, snr_rts: f64) -> Result<f64> {
    if !(snr_rts > 0.0 && snr_rts.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "RTS SNR must be positive, got {snr_rts}"
        )));
    }
    Ok(snr_tds / snr_rts * var_tds)
}

/// `σ̂²_ML = α₁·σ̃²_TDS + α₂·σ̂²_RTS` with the rescaled training variance.
pub fn combine_variance(tds: &MeasurementSet, rts: &MeasurementSet, method: WeightMethod) -> Result<f64> {
    let var_tds = rescale_tds_variance(sample_variance(tds)?, tds.snr_hat, rts.snr_hat)?;
    let var_rts = sample_variance(rts)?;
    let (a1, a2) = set_weights(tds, rts, method)?;
    Ok(a1 * var_tds + a2 * var_rts)
}

/// Probability mass of N(0, σ²) inside [-Δθ_max, Δθ_max]: `erf(Δθ_max/(√2σ))`.
pub fn truncation_factor(variance: f64, delta_max: f64) -> f64 {
    if variance <= 0.0 {
        return 1.0;
    }
    erf(delta_max / (2.0 * variance).sqrt())
}

/// Default truncation half-width: four standard deviations, floored at the
/// main-lobe half-width `λ/(N d)` and capped at 180°.
pub fn default_delta_max(std_dev: f64, cfg: &ArrayConfig) -> f64 {
    let beam = (cfg.wavelength() / (cfg.n_antennas() as f64 * cfg.spacing())).to_degrees();
    (4.0 * std_dev).max(beam).min(180.0)
}

/// Learned DOA with a truncated Gaussian measurement-error density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianDoaModel {
    pub mean: f64,
    pub variance: f64,
    pub delta_max: f64,
    /// Mass of the untruncated Gaussian inside the window (K_d).
    pub truncation: f64,
}

impl GaussianDoaModel {
    pub fn new(mean: f64, variance: f64, delta_max: f64) -> Result<Self> {
        if !(variance.is_finite() && variance >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "variance must be finite and >= 0, got {variance}"
            )));
        }
        if !(delta_max > 0.0 && delta_max <= 180.0) {
            return Err(Error::InvalidArgument(format!(
                "truncation half-width must lie in (0°, 180°], got {delta_max}"
            )));
        }
        if !mean.is_finite() {
            return Err(Error::InvalidArgument(format!("mean must be finite, got {mean}")));
        }
        Ok(Self {
            mean,
            variance,
            delta_max,
            truncation: truncation_factor(variance, delta_max),
        })
    }

    /// Uses [`default_delta_max`] for the window.
    pub fn with_default_window(mean: f64, variance: f64, cfg: &ArrayConfig) -> Result<Self> {
        Self::new(mean, variance, default_delta_max(variance.max(0.0).sqrt(), cfg))
    }

    /// Zero variance: every measurement agreed.
    pub fn is_point_mass(&self) -> bool {
        self.variance == 0.0
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    /// Recomputes K_d and compares it with the stored value.
    pub fn validate(&self) -> Result<()> {
        let expect = truncation_factor(self.variance, self.delta_max);
        if (expect - self.truncation).abs() > 1e-9 {
            return Err(Error::Constraint(format!(
                "stored truncation factor {} differs from {expect}",
                self.truncation
            )));
        }
        Ok(())
    }

    /// Draws one error Δθ from the truncated density by inverse CDF.
    pub fn sample_error<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.is_point_mass() {
            return 0.0;
        }
        let sd = self.std_dev();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        let a = self.delta_max / sd;
        let lo = normal.cdf(-a);
        let hi = normal.cdf(a);
        let u: f64 = rng.random_range(lo..hi);
        (sd * normal.inverse_cdf(u)).clamp(-self.delta_max, self.delta_max)
    }
}

/// Truncated Gaussian density of Δθ (1/degree); zero outside the window.
pub fn truncated_pdf(model: &GaussianDoaModel, delta: f64) -> f64 {
    if delta.abs() > model.delta_max {
        return 0.0;
    }
    if model.is_point_mass() {
        return if delta == 0.0 { f64::INFINITY } else { 0.0 };
    }
    let v = model.variance;
    (-delta * delta / (2.0 * v)).exp() / (model.truncation * (2.0 * std::f64::consts::PI * v).sqrt())
}

/// Where the truncation window comes from when a model is learned.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaWindow {
    /// [`default_delta_max`] for the learned σ.
    Default,
    /// A fixed half-width in degrees.
    Fixed(f64),
    /// A multiple of the learned σ, capped at 180°.
    Sigmas(f64),
}

/// Learns the full model from both sets.
pub fn learn_model(
    tds: &MeasurementSet,
    rts: &MeasurementSet,
    method: WeightMethod,
    state: MotionState,
    window: DeltaWindow,
    cfg: &ArrayConfig,
) -> Result<GaussianDoaModel> {
    let mean = combine_mean(tds, rts, method, state)?;
    let variance = combine_variance(tds, rts, method)?;
    let sd = variance.sqrt();
    let delta_max = match window {
        DeltaWindow::Default => default_delta_max(sd, cfg),
        DeltaWindow::Fixed(d) => d,
        DeltaWindow::Sigmas(s) => (s * sd).min(180.0),
    };
    GaussianDoaModel::new(mean, variance, delta_max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianityThresholds {
    pub max_abs_skewness: f64,
    pub max_abs_excess_kurtosis: f64,
    pub min_samples: usize,
}

impl Default for GaussianityThresholds {
    fn default() -> Self {
        Self {
            max_abs_skewness: 0.3,
            max_abs_excess_kurtosis: 1.0,
            min_samples: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// Bin edges, one more than `counts`.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianityReport {
    pub histogram: Histogram,
    pub mean: f64,
    pub std_error: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub pass: bool,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Freedman–Diaconis histogram plus moment-based normality screen.
pub fn gaussianity_check(samples: &[f64], thresholds: GaussianityThresholds) -> Result<GaussianityReport> {
    let n = samples.len();
    if n < thresholds.min_samples.max(2) {
        return Err(Error::TooFewSamples {
            needed: thresholds.min_samples.max(2),
            got: n,
        });
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for x in samples {
        let d = x - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let (skewness, excess_kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };
    let std_error = (m2 * nf / (nf - 1.0)).sqrt() / nf.sqrt();

    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    let width = 2.0 * iqr / nf.cbrt();
    let bins = if width > 0.0 && hi > lo {
        (((hi - lo) / width).ceil() as usize).clamp(1, 10_000)
    } else {
        1
    };
    let step = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let edges: Vec<f64> = (0..=bins).map(|i| lo + step * i as f64).collect();
    let mut counts = vec![0usize; bins];
    for x in &sorted {
        let idx = (((x - lo) / step) as usize).min(bins - 1);
        counts[idx] += 1;
    }

    let pass = skewness.abs() < thresholds.max_abs_skewness
        && excess_kurtosis.abs() < thresholds.max_abs_excess_kurtosis;
    Ok(GaussianityReport {
        histogram: Histogram { edges, counts },
        mean,
        std_error,
        skewness,
        excess_kurtosis,
        pass,
    })
}
