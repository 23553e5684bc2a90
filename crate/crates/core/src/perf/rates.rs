//! Achievable and secrecy rates of the DM link.

use serde::{Deserialize, Serialize};

use crate::array::{centered_steering, check_angle, ArrayConfig};
use crate::beamformer::HybridBeamformer;
use crate::error::{Error, Result};
use crate::{CMatrix, CVector, C64};

/// A transmitter, its beamformer and the two receivers.
#[derive(Debug, Clone)]
pub struct LinkScenario {
    pub cfg: ArrayConfig,
    pub beamformer: HybridBeamformer,
    /// Bob's direction in degrees.
    pub theta_d: f64,
    /// Eve's direction in degrees.
    pub theta_e: f64,
    /// Total transmit power.
    pub p_s: f64,
    pub noise_d: f64,
    pub noise_e: f64,
    cm_beam: CVector,
    an_beam: CMatrix,
}

/// Receive-side view of the beamformer at one exact angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGains {
    /// `h^H(θ) V v_BB`.
    pub signal: C64,
    /// `‖h^H(θ) V T_BB‖²`.
    pub an_power: f64,
}

impl LinkScenario {
    /// Equal noise power `noise` at both receivers.
    pub fn new(
        cfg: ArrayConfig,
        beamformer: HybridBeamformer,
        theta_d: f64,
        theta_e: f64,
        p_s: f64,
        noise: f64,
    ) -> Result<Self> {
        Self::with_noises(cfg, beamformer, theta_d, theta_e, p_s, noise, noise)
    }

    pub fn with_noises(
        cfg: ArrayConfig,
        beamformer: HybridBeamformer,
        theta_d: f64,
        theta_e: f64,
        p_s: f64,
        noise_d: f64,
        noise_e: f64,
    ) -> Result<Self> {
        check_angle(theta_d)?;
        check_angle(theta_e)?;
        if !(p_s.is_finite() && p_s >= 0.0) {
            return Err(Error::InvalidArgument(format!("P_s must be finite and >= 0, got {p_s}")));
        }
        for v in [noise_d, noise_e] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("noise power must be positive, got {v}")));
            }
        }
        if beamformer.analog.n_antennas() != cfg.n_antennas() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} antennas", cfg.n_antennas()),
                got: format!("{} antennas", beamformer.analog.n_antennas()),
            });
        }
        let cm_beam = beamformer.confidential_beam()?;
        let an_beam = beamformer.an_beam()?;
        Ok(Self {
            cfg,
            beamformer,
            theta_d,
            theta_e,
            p_s,
            noise_d,
            noise_e,
            cm_beam,
            an_beam,
        })
    }

    /// `P_s = 10^{snr/10}` with unit noise at both receivers.
    pub fn from_snr_db(
        cfg: ArrayConfig,
        beamformer: HybridBeamformer,
        theta_d: f64,
        theta_e: f64,
        snr_db: f64,
    ) -> Result<Self> {
        Self::new(cfg, beamformer, theta_d, theta_e, crate::db_to_linear(snr_db), 1.0)
    }

    pub fn gains(&self, theta: f64) -> Result<LinkGains> {
        let row = centered_steering(&self.cfg, theta)?;
        let signal = row.transpose() * &self.cm_beam;
        let an = row.transpose() * &self.an_beam;
        Ok(LinkGains {
            signal: signal[0],
            an_power: an.norm_squared(),
        })
    }
}

/// `log₂(1 + βP_s|h^H V v|² / ((1−β)P_s‖h^H V T‖² + σ²))` at the exact
/// angle `theta`.
pub fn achievable_rate(scenario: &LinkScenario, theta: f64, noise: f64) -> Result<f64> {
    let g = scenario.gains(theta)?;
    let beta = scenario.beamformer.beta;
    let p = scenario.p_s;
    let sinr = beta * p * g.signal.norm_sqr() / ((1.0 - beta) * p * g.an_power + noise);
    Ok((1.0 + sinr).log2())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub r_desired: f64,
    pub r_eve: f64,
    pub secrecy: f64,
}

/// Rates at the exact angles and `R_S = max(0, R_d − R_e)`.
pub fn secrecy_rate(scenario: &LinkScenario, theta_d: f64, theta_e: f64) -> Result<RateReport> {
    let r_desired = achievable_rate(scenario, theta_d, scenario.noise_d)?;
    let r_eve = achievable_rate(scenario, theta_e, scenario.noise_e)?;
    Ok(RateReport {
        r_desired,
        r_eve,
        secrecy: (r_desired - r_eve).max(0.0),
    })
}
