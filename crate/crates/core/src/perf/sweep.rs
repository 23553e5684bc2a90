//! Monte Carlo summaries and their CSV/JSON serialization.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub mean: f64,
    pub std_error: f64,
    pub n_trials: usize,
}

/// Mean and standard error, summed in slice order.
pub fn summarize(samples: &[f64]) -> SeriesPoint {
    let n = samples.len();
    if n == 0 {
        return SeriesPoint {
            mean: f64::NAN,
            std_error: f64::NAN,
            n_trials: 0,
        };
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let std_error = if n > 1 {
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    SeriesPoint {
        mean,
        std_error,
        n_trials: n,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub points: Vec<SeriesPoint>,
}

/// Named curves over a shared axis plus a metadata snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis_label: String,
    pub axis: Vec<f64>,
    pub series: Vec<Series>,
    pub metadata: serde_json::Value,
}

impl SweepResult {
    pub fn new(axis_label: impl Into<String>, axis: Vec<f64>, metadata: serde_json::Value) -> Self {
        Self {
            axis_label: axis_label.into(),
            axis,
            series: Vec::new(),
            metadata,
        }
    }

    pub fn push_series(&mut self, name: impl Into<String>, points: Vec<SeriesPoint>) -> Result<()> {
        let name = name.into();
        if points.len() != self.axis.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} points", self.axis.len()),
                got: format!("{} points in series {name}", points.len()),
            });
        }
        if points.iter().any(|p| p.n_trials == 0) {
            return Err(Error::InvalidArgument(format!("series {name} has an empty point")));
        }
        self.series.push(Series { name, points });
        Ok(())
    }

    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn validate(&self) -> Result<()> {
        for s in &self.series {
            if s.points.len() != self.axis.len() || s.points.iter().any(|p| p.n_trials == 0) {
                return Err(Error::Constraint(format!("series {} does not match the axis", s.name)));
            }
        }
        Ok(())
    }

    /// One row per axis value; each series contributes `_mean`,
    /// `_std_error` and `_n_trials` columns.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![self.axis_label.clone()];
        for s in &self.series {
            header.push(format!("{}_mean", s.name));
            header.push(format!("{}_std_error", s.name));
            header.push(format!("{}_n_trials", s.name));
        }
        w.write_record(&header)?;
        for (i, x) in self.axis.iter().enumerate() {
            let mut row = vec![x.to_string()];
            for s in &self.series {
                let p = s.points[i];
                row.push(p.mean.to_string());
                row.push(p.std_error.to_string());
                row.push(p.n_trials.to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `<tag>-<seed>`.
    pub fn file_stem(tag: &str, seed: u64) -> String {
        format!("{tag}-{seed}")
    }

    /// Writes `<dir>/<tag>-<seed>.csv` and `.json`.
    pub fn write_files(&self, dir: &Path, tag: &str, seed: u64) -> Result<(PathBuf, PathBuf)> {
        self.validate()?;
        std::fs::create_dir_all(dir)?;
        let stem = Self::file_stem(tag, seed);
        let csv_path = dir.join(format!("{stem}.csv"));
        let json_path = dir.join(format!("{stem}.json"));
        self.write_csv(File::create(&csv_path)?)?;
        std::fs::write(&json_path, self.to_json()?)?;
        Ok((csv_path, json_path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_values() {
        let p = summarize(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(p.mean, 2.5);
        assert!((p.std_error - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(summarize(&[7.0]).std_error, 0.0);
        assert_eq!(summarize(&[]).n_trials, 0);
    }

    #[test]
    fn csv_layout_and_length_check() {
        let mut r = SweepResult::new("snr_db", vec![0.0, 10.0], serde_json::json!({"seed": 1}));
        let p = summarize(&[1.0, 2.0]);
        r.push_series("rmse", vec![p, p]).unwrap();
        assert!(r.push_series("bad", vec![p]).is_err());
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "snr_db,rmse_mean,rmse_std_error,rmse_n_trials");
        assert_eq!(lines.next().unwrap(), "0,1.5,0.5,2");
        let back: SweepResult = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        assert_eq!(SweepResult::file_stem("sweep-rmse", 42), "sweep-rmse-42");
    }
}
