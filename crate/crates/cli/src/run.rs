//! Experiment dispatch and result emission.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use had_dm::density::GaussianDoaModel;
use had_dm::perf::{
    density_experiment, dm_comparison, rmse_sweep, snr_estimation, DensityOutcome, DensitySetup, DmSetup,
    EstimatorSetup, SnrEstimationOutcome, StageSetup,
};
use had_dm::rng::{derive_seed, stream};
use had_dm::{ArrayConfig, DoaEstimate, SweepResult};
use serde_json::{json, Value};

use crate::config::{Experiment, ExperimentConfig, Format};

/// What an experiment produced, before it is written out.
pub enum Outcome {
    Doa { truth: f64, estimate: DoaEstimate },
    Sweep(SweepResult),
    Density(DensityOutcome),
    SnrEst(SnrEstimationOutcome),
}

pub struct Emitted {
    pub data: PathBuf,
    pub meta: PathBuf,
}

fn estimator(cfg: ArrayConfig, c: &ExperimentConfig, theta: f64, snr_db: Option<f64>) -> EstimatorSetup {
    EstimatorSetup {
        n_snapshots: c.scenario.n_snapshots,
        l_amb: c.scenario.l_amb,
        ..EstimatorSetup::new(cfg, theta, snr_db)
    }
}

fn density_setup(cfg: ArrayConfig, c: &ExperimentConfig, theta: f64) -> DensitySetup {
    let s = &c.scenario;
    let mut d = DensitySetup::new(estimator(cfg, c, theta, None), s.snr_tds_db, s.snr_rts_db);
    d.tds = StageSetup {
        snr_db: s.snr_tds_db,
        n_measurements: s.n_tds,
    };
    d.rts = StageSetup {
        snr_db: s.snr_rts_db,
        n_measurements: s.n_rts,
    };
    d.method = s.weight_method;
    d.state = s.state;
    d.snr_snapshots = s.snr_snapshots;
    d
}

/// Runs the configured experiment. The config must already be validated.
pub fn execute(c: &ExperimentConfig) -> had_dm::Result<Outcome> {
    let cfg = c.array_config().map_err(|e| had_dm::Error::InvalidConfig(e.to_string()))?;
    let s = &c.scenario;
    match c.experiment {
        Experiment::Doa => {
            let estimate = estimator(cfg, c, s.theta_d, s.snr_db).estimate(stream(c.seed, 0))?;
            Ok(Outcome::Doa {
                truth: s.theta_d,
                estimate,
            })
        }
        Experiment::SweepRmse => Ok(Outcome::Sweep(rmse_sweep(
            &estimator(cfg, c, s.theta_d, None),
            &s.snr_grid,
            s.n_trials,
            c.seed,
        )?)),
        Experiment::Density => Ok(Outcome::Density(density_experiment(
            &density_setup(cfg, c, s.theta_d),
            c.seed,
        )?)),
        Experiment::DmEval => {
            let learn = |theta: f64, i: u64| -> had_dm::Result<GaussianDoaModel> {
                Ok(density_experiment(&density_setup(cfg, c, theta), derive_seed(c.seed, i))?.model)
            };
            let bob = learn(s.theta_d, 1)?;
            let eve = learn(s.theta_e, 2)?;
            let setup = DmSetup {
                cfg,
                bob,
                eve,
                beta: s.beta,
                n_streams: c.n_streams(),
                snr_grid: s.snr_grid.clone(),
                n_draws: s.n_draws,
                bits_per_draw: s.bits_per_draw,
            };
            let mut sweep = dm_comparison(&setup, derive_seed(c.seed, 3))?;
            if let Value::Object(m) = &mut sweep.metadata {
                m.insert("learned_bob".into(), serde_json::to_value(bob)?);
                m.insert("learned_eve".into(), serde_json::to_value(eve)?);
            }
            Ok(Outcome::Sweep(sweep))
        }
        Experiment::SnrEst => Ok(Outcome::SnrEst(snr_estimation(
            &estimator(cfg, c, s.theta_d, s.snr_db),
            s.noise_snapshots,
            s.snr_snapshots,
            c.seed,
        )?)),
    }
}

fn write_table(path: &Path, header: &[&str], rows: Vec<Vec<String>>) -> had_dm::Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn quantities(items: Vec<(&str, String)>) -> Vec<Vec<String>> {
    items.into_iter().map(|(k, v)| vec![k.to_string(), v]).collect()
}

fn model_rows(prefix: &str, m: &GaussianDoaModel) -> Vec<(String, String)> {
    vec![
        (format!("{prefix}mean"), m.mean.to_string()),
        (format!("{prefix}variance"), m.variance.to_string()),
        (format!("{prefix}delta_max"), m.delta_max.to_string()),
        (format!("{prefix}truncation"), m.truncation.to_string()),
    ]
}

fn write_csv(outcome: &Outcome, path: &Path) -> had_dm::Result<()> {
    match outcome {
        Outcome::Doa { estimate, .. } => write_table(
            path,
            &["wrap_index", "angle_deg", "steered_power", "selected"],
            estimate
                .candidates
                .iter()
                .map(|c| {
                    vec![
                        c.wrap_index.to_string(),
                        c.angle.to_string(),
                        c.power.map(|p| p.to_string()).unwrap_or_default(),
                        (c.wrap_index == estimate.selected_wrap_index).to_string(),
                    ]
                })
                .collect(),
        ),
        Outcome::Sweep(s) => s.write_csv(File::create(path)?),
        Outcome::Density(d) => {
            let mut rows: Vec<(String, String)> = model_rows("model_", &d.model);
            rows.extend([
                ("tds_mean".to_string(), d.tds_mean.to_string()),
                ("tds_variance".to_string(), d.tds_variance.to_string()),
                ("tds_snr_hat".to_string(), d.tds_snr_hat.to_string()),
                ("rts_mean".to_string(), d.rts_mean.to_string()),
                ("rts_variance".to_string(), d.rts_variance.to_string()),
                ("rts_snr_hat".to_string(), d.rts_snr_hat.to_string()),
            ]);
            if let Some(g) = &d.gaussianity {
                rows.extend([
                    ("gaussianity_skewness".to_string(), g.skewness.to_string()),
                    ("gaussianity_excess_kurtosis".to_string(), g.excess_kurtosis.to_string()),
                    ("gaussianity_pass".to_string(), g.pass.to_string()),
                ]);
            }
            write_table(
                path,
                &["quantity", "value"],
                rows.into_iter().map(|(k, v)| vec![k, v]).collect(),
            )
        }
        Outcome::SnrEst(o) => write_table(
            path,
            &["quantity", "value"],
            quantities(vec![
                ("truth_per_antenna", o.truth_per_antenna.to_string()),
                ("rho_hat", o.estimate.rho_hat.to_string()),
                ("per_antenna_snr", o.estimate.per_antenna_snr.to_string()),
                ("noise_floor", o.noise_floor.to_string()),
                ("doa_selected", o.doa.selected.to_string()),
                ("snapshots_used", o.estimate.snapshots_used.to_string()),
            ]),
        ),
    }
}

fn to_json(outcome: &Outcome) -> had_dm::Result<String> {
    let v = match outcome {
        Outcome::Doa { truth, estimate } => json!({"theta_true": truth, "estimate": estimate}),
        Outcome::Sweep(s) => serde_json::to_value(s)?,
        Outcome::Density(d) => serde_json::to_value(d)?,
        Outcome::SnrEst(o) => serde_json::to_value(o)?,
    };
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

/// Writes `<dir>/<experiment>-<seed>.<format>` and its `.meta.json` sidecar.
pub fn emit(c: &ExperimentConfig, outcome: &Outcome, started: Instant, threads: usize) -> had_dm::Result<Emitted> {
    let dir = &c.output.dir;
    std::fs::create_dir_all(dir)?;
    let stem = SweepResult::file_stem(c.experiment.tag(), c.seed);
    let ext = match c.output.format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let data = dir.join(format!("{stem}.{ext}"));
    match c.output.format {
        Format::Csv => write_csv(outcome, &data)?,
        Format::Json => std::fs::write(&data, to_json(outcome)?)?,
    }
    let meta_path = dir.join(format!("{stem}.meta.json"));
    let meta = json!({
        "experiment": c.experiment.tag(),
        "seed": c.seed,
        "version": crate::VERSION,
        "data_file": data.file_name().map(|n| n.to_string_lossy().into_owned()),
        "threads": threads,
        "wall_time_s": started.elapsed().as_secs_f64(),
        "config": c,
    });
    let mut f = File::create(&meta_path)?;
    f.write_all((serde_json::to_string_pretty(&meta)? + "\n").as_bytes())?;
    Ok(Emitted { data, meta: meta_path })
}
