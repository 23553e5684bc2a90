//! Gray-mapped QPSK over the DM link.
//!
//! Bit 0 rides on the sign of the in-phase part, bit 1 on the quadrature
//! part, a zero bit mapping to the positive half-axis.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perf::rates::LinkScenario;
use crate::rng::complex_gaussian;
use crate::special::q_function;
use crate::C64;

/// Unit-energy Gray QPSK symbol for `(b0, b1)`.
pub fn qpsk_map(bits: (bool, bool)) -> C64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re = if bits.0 { -s } else { s };
    let im = if bits.1 { -s } else { s };
    C64::new(re, im)
}

/// Quadrant decision.
pub fn qpsk_demap(sample: C64) -> (bool, bool) {
    (sample.re < 0.0, sample.im < 0.0)
}

/// Bit error probability of Gray QPSK at symbol SNR γ: `Q(√γ)`.
pub fn gray_qpsk_ber(symbol_snr: f64) -> f64 {
    q_function(symbol_snr.max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerReport {
    pub ber_desired: f64,
    pub ber_eve: f64,
    pub errors_desired: u64,
    pub errors_eve: u64,
    pub n_bits: u64,
}

/// Sends `n_bits` random bits as QPSK with AN and counts decision errors at
/// the exact angles `theta_d` and `theta_e`.
///
/// Each receiver divides by its own composite gain `√(βP_s)·h^H V v_BB`
/// before the quadrant decision; the AN and thermal noise are unknown to
/// it. A receiver with zero gain decides on the raw sample.
pub fn ber_trial<R: Rng + ?Sized>(
    scenario: &LinkScenario,
    theta_d: f64,
    theta_e: f64,
    n_bits: usize,
    rng: &mut R,
) -> Result<BerReport> {
    if n_bits < 1000 || n_bits % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "n_bits must be even and at least 1000, got {n_bits}"
        )));
    }
    let bf = &scenario.beamformer;
    let an = bf.an_beam()?;
    let rows = [
        crate::array::centered_steering(&scenario.cfg, theta_d)?,
        crate::array::centered_steering(&scenario.cfg, theta_e)?,
    ];
    let noises = [scenario.noise_d, scenario.noise_e];
    let amp_s = (bf.beta * scenario.p_s).sqrt();
    let amp_an = ((1.0 - bf.beta) * scenario.p_s).sqrt();
    let mut gains = [C64::new(0.0, 0.0); 2];
    let mut an_rows = Vec::with_capacity(2);
    for (u, row) in rows.iter().enumerate() {
        gains[u] = scenario.gains(if u == 0 { theta_d } else { theta_e })?.signal * amp_s;
        an_rows.push((row.transpose() * &an).scale(amp_an));
    }
    let n_streams = an.ncols();
    let mut z = vec![C64::new(0.0, 0.0); n_streams];
    let mut errors = [0u64; 2];
    for _ in 0..n_bits / 2 {
        let bits = (rng.random::<bool>(), rng.random::<bool>());
        let s = qpsk_map(bits);
        if amp_an > 0.0 {
            for zi in z.iter_mut() {
                *zi = complex_gaussian(rng, 1.0);
            }
        }
        for u in 0..2 {
            let mut y = gains[u] * s + complex_gaussian(rng, noises[u]);
            if amp_an > 0.0 {
                y += an_rows[u].iter().zip(&z).map(|(b, zi)| b * zi).sum::<C64>();
            }
            let eq = if gains[u].norm() > 0.0 { y / gains[u] } else { y };
            let d = qpsk_demap(eq);
            errors[u] += (d.0 != bits.0) as u64 + (d.1 != bits.1) as u64;
        }
    }
    let n = n_bits as u64;
    Ok(BerReport {
        ber_desired: errors[0] as f64 / n as f64,
        ber_eve: errors[1] as f64 / n as f64,
        errors_desired: errors[0],
        errors_eve: errors[1],
        n_bits: n,
    })
}
