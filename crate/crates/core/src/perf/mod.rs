//! Link-level metrics and the Monte Carlo experiment drivers.
//!
//! Transmit experiments use `P_s/σ²` in dB as their SNR axis; estimation
//! experiments use the per-antenna `σ_s²/σ_n²`. Every driver derives one
//! random stream per trial from the master seed and collects trials in
//! index order, so serial and parallel runs agree bit for bit.

pub mod ber;
pub mod experiments;
pub mod rates;
pub mod sweep;

pub use ber::{ber_trial, gray_qpsk_ber, qpsk_demap, qpsk_map, BerReport};
pub use experiments::{
    combiner_study, density_experiment, dm_comparison, doa_errors, rmse_sweep, snr_estimation, thread_pool,
    CombinerPoint, CombinerStudy, CombinerStudySetup, DensityOutcome, DensitySetup, DmSetup, EstimatorSetup,
    SnrEstimationOutcome, StageSetup,
};
pub use rates::{achievable_rate, secrecy_rate, LinkGains, LinkScenario, RateReport};
pub use sweep::{summarize, Series, SeriesPoint, SweepResult};
