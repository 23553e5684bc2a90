//! End-to-end Monte Carlo drivers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{AnalogMatrix, ArrayConfig, EmitterSource};
use crate::beamformer::{nonrobust_hybrid, robust_hybrid};
use crate::density::{
    combine_mean, combine_variance, gaussianity_check, learn_model, sample_mean, sample_variance, DeltaWindow,
    GaussianDoaModel, GaussianityReport, GaussianityThresholds, MeasurementSet, MotionState, SetLabel, WeightMethod,
};
use crate::error::{Error, Result};
use crate::esprit::{covariance_of, estimate_doa_from_source, estimate_snr, DoaEstimate, SnrEstimate};
use crate::perf::ber::ber_trial;
use crate::perf::rates::{secrecy_rate, LinkScenario};
use crate::perf::sweep::{summarize, SeriesPoint, SweepResult};
use crate::rng::{substream, SimRng};

/// Caps the worker count; unset or 0 lets rayon decide.
pub const THREADS_ENV: &str = "HAD_DM_THREADS";

/// Thread pool sized from [`THREADS_ENV`].
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let n = match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| {
            Error::InvalidConfig(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}"))
        })?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))
}

const TAG_RMSE: u64 = 1;
const TAG_TDS: u64 = 2;
const TAG_RTS: u64 = 3;
const TAG_SNR: u64 = 4;
const TAG_DM: u64 = 5;
const TAG_REFERENCE: u64 = 6;
const TAG_TRIALS: u64 = 7;

/// Smallest SNR estimate handed to the weight rules.
const SNR_HAT_FLOOR: f64 = 1e-6;

fn path_with(path: &[u64], i: u64) -> Vec<u64> {
    let mut p = path.to_vec();
    p.push(i);
    p
}

/// One I-HAD-ESPRIT measurement setup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSetup {
    pub cfg: ArrayConfig,
    /// True direction in degrees.
    pub theta: f64,
    /// Per-antenna SNR in dB with unit noise; `None` is noiseless.
    pub snr_db: Option<f64>,
    /// Snapshots for the covariance (L).
    pub n_snapshots: usize,
    /// Snapshots per ambiguity candidate (L_amb).
    pub l_amb: usize,
}

impl EstimatorSetup {
    /// L = L_amb = 64.
    pub fn new(cfg: ArrayConfig, theta: f64, snr_db: Option<f64>) -> Self {
        Self {
            cfg,
            theta,
            snr_db,
            n_snapshots: 64,
            l_amb: 64,
        }
    }

    pub fn at_snr(&self, snr_db: Option<f64>) -> Self {
        Self { snr_db, ..*self }
    }

    pub fn source(&self, rng: SimRng) -> Result<EmitterSource> {
        match self.snr_db {
            Some(snr) => EmitterSource::at_snr_db(self.cfg, self.theta, snr, rng),
            None => EmitterSource::new(self.cfg, self.theta, 1.0, 0.0, rng),
        }
    }

    pub fn estimate(&self, rng: SimRng) -> Result<DoaEstimate> {
        let mut src = self.source(rng)?;
        estimate_doa_from_source(&self.cfg, &mut src, self.n_snapshots, self.l_amb)
    }
}

/// `n` independent estimates on streams `path ++ [i]`, in trial order.
pub fn doa_estimates(setup: &EstimatorSetup, master: u64, path: &[u64], n: usize) -> Result<Vec<DoaEstimate>> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| setup.estimate(substream(master, &path_with(path, i))))
        .collect()
}

/// Signed errors `θ̂ − θ` of `n` estimates.
pub fn doa_errors(setup: &EstimatorSetup, master: u64, path: &[u64], n: usize) -> Result<Vec<f64>> {
    Ok(doa_estimates(setup, master, path, n)?
        .iter()
        .map(|e| e.selected - setup.theta)
        .collect())
}

/// RMSE with a delta-method standard error `SE(MSE)/(2·RMSE)`.
pub fn rmse_point(errors: &[f64]) -> SeriesPoint {
    let sq: Vec<f64> = errors.iter().map(|e| e * e).collect();
    let mse = summarize(&sq);
    let rmse = mse.mean.sqrt();
    SeriesPoint {
        mean: rmse,
        std_error: if rmse > 0.0 { mse.std_error / (2.0 * rmse) } else { 0.0 },
        n_trials: errors.len(),
    }
}

/// RMSE and bias of the estimator over an SNR grid (per-antenna dB).
pub fn rmse_sweep(setup: &EstimatorSetup, snr_grid: &[f64], n_trials: usize, seed: u64) -> Result<SweepResult> {
    if n_trials == 0 {
        return Err(Error::InvalidArgument("n_trials must be at least 1".into()));
    }
    let meta = serde_json::json!({
        "experiment": "sweep-rmse",
        "setup": setup,
        "snr_axis": "per-antenna signal-to-noise ratio in dB",
        "n_trials": n_trials,
        "seed": seed,
    });
    let mut out = SweepResult::new("snr_db", snr_grid.to_vec(), meta);
    let mut rmse = Vec::new();
    let mut bias = Vec::new();
    for (p, &snr) in snr_grid.iter().enumerate() {
        let errors = doa_errors(&setup.at_snr(Some(snr)), seed, &[TAG_RMSE, p as u64], n_trials)?;
        rmse.push(rmse_point(&errors));
        bias.push(summarize(&errors));
    }
    out.push_series("rmse", rmse)?;
    out.push_series("bias", bias)?;
    Ok(out)
}

/// Noise power of the zero-phase branches from `l` fresh snapshots.
pub fn measure_noise_floor(source: &mut EmitterSource, cfg: &ArrayConfig, l: usize) -> Result<f64> {
    use crate::array::SnapshotSource;
    let y = source.draw_combined(&AnalogMatrix::zero_phase(cfg), l)?;
    Ok(covariance_of(&y)?.noise_subspace_power())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnrEstimationOutcome {
    /// Per-antenna SNR of the simulated emitter (linear).
    pub truth_per_antenna: f64,
    pub noise_floor: f64,
    pub doa: DoaEstimate,
    pub estimate: SnrEstimate,
}

/// Direction estimate, then noise floor from `noise_snapshots`, then the
/// re-steered SNR estimate over `snr_snapshots`, all from one emitter.
pub fn snr_estimation(
    setup: &EstimatorSetup,
    noise_snapshots: usize,
    snr_snapshots: usize,
    seed: u64,
) -> Result<SnrEstimationOutcome> {
    let snr_db = setup
        .snr_db
        .ok_or_else(|| Error::InvalidArgument("SNR estimation needs a noisy setup".into()))?;
    let mut src = setup.source(substream(seed, &[TAG_SNR]))?;
    let doa = estimate_doa_from_source(&setup.cfg, &mut src, setup.n_snapshots, setup.l_amb)?;
    let noise_floor = measure_noise_floor(&mut src, &setup.cfg, noise_snapshots)?;
    let estimate = estimate_snr(&setup.cfg, doa.selected, &mut src, noise_floor, snr_snapshots)?;
    Ok(SnrEstimationOutcome {
        truth_per_antenna: crate::db_to_linear(snr_db),
        noise_floor,
        doa,
        estimate,
    })
}

/// Size and SNR of one measurement stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageSetup {
    /// Per-antenna SNR in dB.
    pub snr_db: f64,
    pub n_measurements: usize,
}

/// Repeated estimates at one SNR, labelled with the estimated SNR of the
/// stage (clamped to a small positive floor).
fn measurement_set(
    setup: &EstimatorSetup,
    stage: StageSetup,
    label: SetLabel,
    snr_snapshots: usize,
    master: u64,
    path: &[u64],
) -> Result<MeasurementSet> {
    let s = setup.at_snr(Some(stage.snr_db));
    let values: Vec<f64> = doa_estimates(&s, master, &path_with(path, 0), stage.n_measurements)?
        .iter()
        .map(|e| e.selected)
        .collect();
    let theta_hat = values.iter().sum::<f64>() / values.len().max(1) as f64;
    let mut src = s.source(substream(master, &path_with(path, 1)))?;
    let floor = measure_noise_floor(&mut src, &s.cfg, snr_snapshots)?;
    let est = estimate_snr(&s.cfg, theta_hat.clamp(0.0, 180.0), &mut src, floor, snr_snapshots)?;
    MeasurementSet::new(values, est.per_antenna_snr.max(SNR_HAT_FLOOR), label)
}

/// Training and real-time stages feeding the ML combiner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensitySetup {
    pub estimator: EstimatorSetup,
    pub tds: StageSetup,
    pub rts: StageSetup,
    pub method: WeightMethod,
    pub state: MotionState,
    pub window: DeltaWindow,
    /// Snapshots for each set's noise floor and SNR estimate.
    pub snr_snapshots: usize,
    pub thresholds: GaussianityThresholds,
}

impl DensitySetup {
    /// N_TDS = 1000, N_RTS = 10, method III, stable user, default window.
    pub fn new(estimator: EstimatorSetup, snr_tds_db: f64, snr_rts_db: f64) -> Self {
        Self {
            estimator,
            tds: StageSetup {
                snr_db: snr_tds_db,
                n_measurements: 1000,
            },
            rts: StageSetup {
                snr_db: snr_rts_db,
                n_measurements: 10,
            },
            method: WeightMethod::SnrCount,
            state: MotionState::Stable,
            window: DeltaWindow::Default,
            snr_snapshots: 1000,
            thresholds: GaussianityThresholds::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityOutcome {
    pub model: GaussianDoaModel,
    pub tds_mean: f64,
    pub tds_variance: f64,
    pub tds_snr_hat: f64,
    pub rts_mean: f64,
    pub rts_variance: f64,
    pub rts_snr_hat: f64,
    /// Screen of the training errors; absent when the set is too small.
    pub gaussianity: Option<GaussianityReport>,
}

/// Measures both stages and learns the DOA model.
pub fn density_experiment(setup: &DensitySetup, seed: u64) -> Result<DensityOutcome> {
    let est = &setup.estimator;
    let tds = measurement_set(est, setup.tds, SetLabel::Tds, setup.snr_snapshots, seed, &[TAG_TDS])?;
    let rts = measurement_set(est, setup.rts, SetLabel::Rts, setup.snr_snapshots, seed, &[TAG_RTS])?;
    let model = learn_model(&tds, &rts, setup.method, setup.state, setup.window, &est.cfg)?;
    let gaussianity = if tds.len() >= setup.thresholds.min_samples {
        let errors: Vec<f64> = tds.values.iter().map(|v| v - est.theta).collect();
        Some(gaussianity_check(&errors, setup.thresholds)?)
    } else {
        None
    };
    Ok(DensityOutcome {
        model,
        tds_mean: sample_mean(&tds)?,
        tds_variance: sample_variance(&tds)?,
        tds_snr_hat: tds.snr_hat,
        rts_mean: sample_mean(&rts)?,
        rts_variance: sample_variance(&rts)?,
        rts_snr_hat: rts.snr_hat,
        gaussianity,
    })
}

/// Repeated-combiner study over a grid of real-time SNRs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinerStudySetup {
    pub estimator: EstimatorSetup,
    pub n_tds: usize,
    pub n_rts: usize,
    /// Training SNR for the mean combiners (dB).
    pub snr_tds_mean_db: f64,
    /// Training SNR for the variance combiners (dB).
    pub snr_tds_variance_db: f64,
    pub snr_rts_grid: Vec<f64>,
    pub repetitions: usize,
    pub snr_snapshots: usize,
    /// Estimates per grid point for the reference error variance.
    pub reference_trials: usize,
}

/// Per-repetition estimates at one real-time SNR. Index order in each
/// array: method I, II, III, RTS only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinerPoint {
    pub snr_rts_db: f64,
    pub true_mean: f64,
    pub reference_variance: f64,
    pub mean_estimates: Vec<[f64; 4]>,
    pub variance_estimates: Vec<[f64; 4]>,
}

pub const COMBINER_LABELS: [&str; 4] = ["method_I", "method_II", "method_III", "rts_only"];

fn column(rows: &[[f64; 4]], j: usize) -> Vec<f64> {
    rows.iter().map(|r| r[j]).collect()
}

impl CombinerPoint {
    /// Sample variance of the combined means of estimator `j`.
    pub fn mean_spread(&self, j: usize) -> SeriesPoint {
        let x = column(&self.mean_estimates, j);
        let m = x.iter().sum::<f64>() / x.len() as f64;
        let sq: Vec<f64> = x.iter().map(|v| (v - m).powi(2)).collect();
        summarize(&sq)
    }

    /// `spread(a) − spread(b)` with a paired standard error.
    pub fn mean_spread_difference(&self, a: usize, b: usize) -> SeriesPoint {
        let xa = column(&self.mean_estimates, a);
        let xb = column(&self.mean_estimates, b);
        let n = xa.len() as f64;
        let ma = xa.iter().sum::<f64>() / n;
        let mb = xb.iter().sum::<f64>() / n;
        let d: Vec<f64> = xa.iter().zip(&xb).map(|(u, v)| (u - ma).powi(2) - (v - mb).powi(2)).collect();
        summarize(&d)
    }

    /// Mean squared error of variance estimator `j` against the reference.
    pub fn variance_mse(&self, j: usize) -> SeriesPoint {
        let sq: Vec<f64> = column(&self.variance_estimates, j)
            .iter()
            .map(|v| (v - self.reference_variance).powi(2))
            .collect();
        summarize(&sq)
    }

    pub fn variance_mse_difference(&self, a: usize, b: usize) -> SeriesPoint {
        let r = self.reference_variance;
        let d: Vec<f64> = column(&self.variance_estimates, a)
            .iter()
            .zip(column(&self.variance_estimates, b))
            .map(|(u, v)| (u - r).powi(2) - (v - r).powi(2))
            .collect();
        summarize(&d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinerStudy {
    pub setup: CombinerStudySetup,
    pub seed: u64,
    pub points: Vec<CombinerPoint>,
}

impl CombinerStudy {
    pub fn to_sweep(&self) -> Result<SweepResult> {
        let meta = serde_json::json!({
            "experiment": "combiner-study",
            "setup": self.setup,
            "snr_axis": "per-antenna signal-to-noise ratio of the real-time set in dB",
            "seed": self.seed,
        });
        let mut out = SweepResult::new("snr_rts_db", self.setup.snr_rts_grid.clone(), meta);
        for (j, label) in COMBINER_LABELS.iter().enumerate() {
            out.push_series(format!("mean_spread_{label}"), self.points.iter().map(|p| p.mean_spread(j)).collect())?;
        }
        for (j, label) in COMBINER_LABELS.iter().enumerate() {
            out.push_series(format!("variance_mse_{label}"), self.points.iter().map(|p| p.variance_mse(j)).collect())?;
        }
        Ok(out)
    }
}

/// For each repetition: one training set at each training SNR, shared by
/// every grid point, and a fresh real-time set per grid point.
pub fn combiner_study(setup: &CombinerStudySetup, seed: u64) -> Result<CombinerStudy> {
    if setup.repetitions < 2 {
        return Err(Error::InvalidArgument("need at least two repetitions".into()));
    }
    let est = &setup.estimator;
    let stage = |snr_db, n| StageSetup {
        snr_db,
        n_measurements: n,
    };
    let training: Vec<(MeasurementSet, MeasurementSet)> = (0..setup.repetitions as u64)
        .into_par_iter()
        .map(|r| {
            let mean_set = measurement_set(
                est,
                stage(setup.snr_tds_mean_db, setup.n_tds),
                SetLabel::Tds,
                setup.snr_snapshots,
                seed,
                &[TAG_TDS, r, 0],
            )?;
            let var_set = measurement_set(
                est,
                stage(setup.snr_tds_variance_db, setup.n_tds),
                SetLabel::Tds,
                setup.snr_snapshots,
                seed,
                &[TAG_TDS, r, 1],
            )?;
            Ok((mean_set, var_set))
        })
        .collect::<Result<_>>()?;

    let mut points = Vec::with_capacity(setup.snr_rts_grid.len());
    for (p, &snr) in setup.snr_rts_grid.iter().enumerate() {
        let reference = doa_errors(&est.at_snr(Some(snr)), seed, &[TAG_REFERENCE, p as u64], setup.reference_trials)?;
        let reference_variance = summarize(&reference).std_error.powi(2) * reference.len() as f64;
        let rows: Vec<([f64; 4], [f64; 4])> = training
            .par_iter()
            .enumerate()
            .map(|(r, (tds_mean, tds_var))| {
                let rts = measurement_set(
                    est,
                    stage(snr, setup.n_rts),
                    SetLabel::Rts,
                    setup.snr_snapshots,
                    seed,
                    &[TAG_RTS, p as u64, r as u64],
                )?;
                let mut means = [0.0; 4];
                let mut vars = [0.0; 4];
                for (j, m) in WeightMethod::ALL.iter().enumerate() {
                    means[j] = combine_mean(tds_mean, &rts, *m, MotionState::Stable)?;
                    vars[j] = combine_variance(tds_var, &rts, *m)?;
                }
                means[3] = sample_mean(&rts)?;
                vars[3] = sample_variance(&rts)?;
                Ok((means, vars))
            })
            .collect::<Result<_>>()?;
        points.push(CombinerPoint {
            snr_rts_db: snr,
            true_mean: est.theta,
            reference_variance,
            mean_estimates: rows.iter().map(|r| r.0).collect(),
            variance_estimates: rows.iter().map(|r| r.1).collect(),
        });
    }
    Ok(CombinerStudy {
        setup: setup.clone(),
        seed,
        points,
    })
}

/// Robust-versus-baseline DM evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmSetup {
    pub cfg: ArrayConfig,
    pub bob: GaussianDoaModel,
    pub eve: GaussianDoaModel,
    pub beta: f64,
    /// AN streams N_s.
    pub n_streams: usize,
    /// Transmit SNR `P_s/σ²` grid in dB.
    pub snr_grid: Vec<f64>,
    pub n_draws: usize,
    pub bits_per_draw: usize,
}

/// Both beamformers are built once from the learned models (the baseline
/// from their means alone). Each draw takes true angles
/// `θ = mean − Δθ` from the models and evaluates both designs at them with
/// common random numbers.
pub fn dm_comparison(setup: &DmSetup, seed: u64) -> Result<SweepResult> {
    if setup.n_draws == 0 {
        return Err(Error::InvalidArgument("n_draws must be at least 1".into()));
    }
    let cfg = setup.cfg;
    let robust = robust_hybrid(&cfg, &setup.bob, &setup.eve, setup.beta, setup.n_streams)?;
    let baseline = nonrobust_hybrid(&cfg, setup.bob.mean, setup.eve.mean, setup.beta, setup.n_streams)?;
    let angles: Vec<(f64, f64)> = (0..setup.n_draws as u64)
        .map(|d| {
            let mut rng = substream(seed, &[TAG_DM, 0, d]);
            let td = (setup.bob.mean - setup.bob.sample_error(&mut rng)).clamp(0.0, 180.0);
            let te = (setup.eve.mean - setup.eve.sample_error(&mut rng)).clamp(0.0, 180.0);
            (td, te)
        })
        .collect();

    let meta = serde_json::json!({
        "experiment": "dm-eval",
        "setup": setup,
        "snr_axis": "transmit power over noise power P_s/sigma^2 in dB",
        "seed": seed,
    });
    let mut out = SweepResult::new("snr_db", setup.snr_grid.clone(), meta);
    let names = [
        "sr_robust",
        "sr_nonrobust",
        "sr_gain",
        "ber_robust",
        "ber_nonrobust",
        "ber_gain",
        "ber_eve_robust",
        "ber_eve_nonrobust",
    ];
    let mut cols: Vec<Vec<SeriesPoint>> = vec![Vec::new(); names.len()];
    for (p, &snr) in setup.snr_grid.iter().enumerate() {
        let sc_r = LinkScenario::from_snr_db(cfg, robust.clone(), setup.bob.mean, setup.eve.mean, snr)?;
        let sc_n = LinkScenario::from_snr_db(cfg, baseline.clone(), setup.bob.mean, setup.eve.mean, snr)?;
        let rows: Vec<[f64; 8]> = angles
            .par_iter()
            .enumerate()
            .map(|(d, &(td, te))| {
                let rr = secrecy_rate(&sc_r, td, te)?;
                let rn = secrecy_rate(&sc_n, td, te)?;
                let rng = substream(seed, &[TAG_DM, 1, p as u64, d as u64]);
                let br = ber_trial(&sc_r, td, te, setup.bits_per_draw, &mut rng.clone())?;
                let bn = ber_trial(&sc_n, td, te, setup.bits_per_draw, &mut rng.clone())?;
                Ok([
                    rr.secrecy,
                    rn.secrecy,
                    rr.secrecy - rn.secrecy,
                    br.ber_desired,
                    bn.ber_desired,
                    br.ber_desired - bn.ber_desired,
                    br.ber_eve,
                    bn.ber_eve,
                ])
            })
            .collect::<Result<_>>()?;
        for (j, col) in cols.iter_mut().enumerate() {
            col.push(summarize(&rows.iter().map(|r| r[j]).collect::<Vec<_>>()));
        }
    }
    for (name, col) in names.iter().zip(cols) {
        out.push_series(*name, col)?;
    }
    Ok(out)
}

/// Independent trial streams for ad-hoc drivers: `path = [TAG_TRIALS, i]`.
pub fn trial_stream(seed: u64, i: u64) -> SimRng {
    substream(seed, &[TAG_TRIALS, i])
}
