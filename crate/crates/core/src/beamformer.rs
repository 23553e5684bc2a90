//! Directional-modulation beamformers for the sub-connected HAD transmitter.
//!
//! The analog stage is either phase-aligned to the point DOA estimate or
//! built from the conditional expectation of the subarray steering vector
//! under the learned truncated Gaussian DOA error (second-order Taylor
//! closed form, then projected onto the constant-modulus set). The digital
//! confidential vector and AN projection are the least-squares fits of
//! fully-digital null-space-projection precoders onto the analog range.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::array::{channel_vector, check_angle, AnalogMatrix, ArrayConfig};
use crate::density::GaussianDoaModel;
use crate::error::{Error, Result};
use crate::linalg::orthonormal_complement;
use crate::special::erf;
use crate::{CMatrix, CVector, C64};

/// Truncated moments of the DOA error in radians: χ₁ = E[Δθ⁴], χ₂ = E[Δθ²].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiMoments {
    pub chi1: f64,
    pub chi2: f64,
}

/// Closed-form fourth and second moments of the truncated Gaussian.
///
/// Inputs are in degrees²/degrees; the moments come back in rad⁴/rad².
/// A zero variance returns the point-mass limit (0, 0).
pub fn chi_moments(variance_deg2: f64, delta_max_deg: f64, truncation: f64) -> ChiMoments {
    if variance_deg2 <= 0.0 {
        return ChiMoments { chi1: 0.0, chi2: 0.0 };
    }
    let s = variance_deg2.sqrt().to_radians();
    let d = delta_max_deg.to_radians();
    let s2 = s * s;
    let tail = (-d * d / (2.0 * s2)).exp();
    let mass = erf(d / (std::f64::consts::SQRT_2 * s));
    let root = (2.0 * PI).sqrt();
    let pre = 2.0 / (truncation * root * s);
    let chi1 = pre * (-s2 * d.powi(3) * tail - 3.0 * s2 * s2 * d * tail + 1.5 * root * s2 * s2 * s * mass);
    let chi2 = pre * (-s2 * d * tail + 0.5 * root * s2 * s * mass);
    ChiMoments {
        chi1: chi1.max(0.0),
        chi2: chi2.max(0.0),
    }
}

/// Intermediate quantities of one robust analog element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustElementTerms {
    /// Phase-alignment term `e^{-jα cos θ̂}`.
    pub xi: C64,
    pub chi1: f64,
    pub chi2: f64,
    /// `ξ·(1 − α²cos²θ̂·χ₁/8 − α²sin²θ̂·χ₂/2)`.
    pub zeta: C64,
    /// `ξ·α cos θ̂·χ₂/2`.
    pub eta: C64,
    /// `ζ + jη`, the Taylor-approximated conditional expectation.
    pub v_hat: C64,
    /// `2πd/λ·[(k−1)M + m − (N+1)/2]`.
    pub alpha: f64,
}

fn element_alpha(cfg: &ArrayConfig, k: usize, m: usize) -> f64 {
    let g = ((k - 1) * cfg.subarray_size() + m) as f64;
    cfg.wavenumber_spacing() * (g - (cfg.n_antennas() as f64 + 1.0) / 2.0)
}

fn check_element(cfg: &ArrayConfig, k: usize, m: usize) -> Result<()> {
    if k == 0 || k > cfg.n_subarrays() || m == 0 || m > cfg.subarray_size() {
        return Err(Error::InvalidArgument(format!(
            "element (k={k}, m={m}) outside 1..={} x 1..={}",
            cfg.n_subarrays(),
            cfg.subarray_size()
        )));
    }
    Ok(())
}

/// Closed-form `E[e^{-jα cos(θ̂ − Δθ)}]` for element (k, m), 1-based.
///
/// The constant term is the mass of the normalized truncated density
/// (one), matching the normalization of χ₁ and χ₂.
pub fn robust_element_terms(
    k: usize,
    m: usize,
    theta_hat: f64,
    model: &GaussianDoaModel,
    cfg: &ArrayConfig,
) -> Result<RobustElementTerms> {
    check_element(cfg, k, m)?;
    check_angle(theta_hat)?;
    let alpha = element_alpha(cfg, k, m);
    let th = theta_hat.to_radians();
    let (s, c) = th.sin_cos();
    let xi = C64::from_polar(1.0, -alpha * c);
    let ChiMoments { chi1, chi2 } = chi_moments(model.variance, model.delta_max, model.truncation);
    let a2 = alpha * alpha;
    let real = 1.0 - a2 * c * c * chi1 / 8.0 - a2 * s * s * chi2 / 2.0;
    let imag = 0.5 * alpha * c * chi2;
    let zeta = xi * real;
    let eta = xi * imag;
    Ok(RobustElementTerms {
        xi,
        chi1,
        chi2,
        zeta,
        eta,
        v_hat: zeta + C64::i() * eta,
        alpha,
    })
}

/// Constant-modulus robust weight `(1/√M)·e^{j∠v̂}`; phase alignment for a
/// point-mass model.
pub fn robust_analog_element(
    k: usize,
    m: usize,
    theta_hat: f64,
    model: &GaussianDoaModel,
    cfg: &ArrayConfig,
) -> Result<C64> {
    let terms = robust_element_terms(k, m, theta_hat, model, cfg)?;
    let amp = 1.0 / (cfg.subarray_size() as f64).sqrt();
    let phase = if model.is_point_mass() || terms.v_hat.norm() == 0.0 {
        terms.xi.arg()
    } else {
        terms.v_hat.arg()
    };
    Ok(C64::from_polar(amp, phase))
}

/// Block-diagonal robust analog matrix.
pub fn robust_analog_matrix(theta_hat: f64, model: &GaussianDoaModel, cfg: &ArrayConfig) -> Result<AnalogMatrix> {
    let m = cfg.subarray_size();
    let blocks = (1..=cfg.n_subarrays())
        .map(|k| {
            let entries = (1..=m)
                .map(|mm| robust_analog_element(k, mm, theta_hat, model, cfg))
                .collect::<Result<Vec<_>>>()?;
            Ok(CVector::from_vec(entries))
        })
        .collect::<Result<Vec<_>>>()?;
    AnalogMatrix::from_blocks(blocks)
}

/// Non-robust baseline: block k equals `h_k(θ̂)`.
pub fn phase_aligned_analog(theta_hat: f64, cfg: &ArrayConfig) -> Result<AnalogMatrix> {
    let h = channel_vector(cfg, theta_hat)?;
    let m = cfg.subarray_size();
    let blocks = (0..cfg.n_subarrays())
        .map(|k| h.rows(k * m, m).into_owned())
        .collect();
    AnalogMatrix::from_blocks(blocks)
}

/// What the transmitter knows about a user's direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionKnowledge {
    /// A point estimate in degrees.
    Point(f64),
    /// A learned mean with its error density.
    Learned(GaussianDoaModel),
}

impl DirectionKnowledge {
    pub fn angle(&self) -> f64 {
        match self {
            DirectionKnowledge::Point(t) => *t,
            DirectionKnowledge::Learned(m) => m.mean,
        }
    }
}

/// Channel proxy: `h(θ̂)` for a point estimate, otherwise the
/// element-wise conditional expectation `v̂/√M` (no modulus projection).
pub fn expected_channel(knowledge: &DirectionKnowledge, cfg: &ArrayConfig) -> Result<CVector> {
    match knowledge {
        DirectionKnowledge::Point(theta) => channel_vector(cfg, *theta),
        DirectionKnowledge::Learned(model) => {
            let m = cfg.subarray_size();
            let amp = 1.0 / (m as f64).sqrt();
            let mut out = CVector::zeros(cfg.n_antennas());
            for k in 1..=cfg.n_subarrays() {
                for mm in 1..=m {
                    let t = robust_element_terms(k, mm, model.mean, model, cfg)?;
                    out[(k - 1) * m + mm - 1] = t.v_hat * amp;
                }
            }
            Ok(out)
        }
    }
}

/// Fully-digital reference precoders.
#[derive(Debug, Clone, PartialEq)]
pub struct FdBeamformer {
    /// Unit-norm confidential beam, orthogonal to Eve's channel proxy.
    pub v_fd: CVector,
    /// N x N_s AN projection with unit Frobenius norm, orthogonal to Bob.
    pub t_fd: CMatrix,
    pub h_desired: CVector,
    pub h_eve: CVector,
}

/// Null-space projection: `v_FD ∝ (I − ĥ_e ĥ_e^H/‖ĥ_e‖²) ĥ_d` and `T_FD`
/// spanning `N_s` directions of the null space of `ĥ_d^H`.
pub fn fd_nsp_beamformers(
    desired: &DirectionKnowledge,
    eve: &DirectionKnowledge,
    cfg: &ArrayConfig,
    n_streams: usize,
) -> Result<FdBeamformer> {
    let n = cfg.n_antennas();
    if n_streams == 0 || n_streams >= n {
        return Err(Error::InvalidArgument(format!(
            "AN stream count must be in 1..{n}, got {n_streams}"
        )));
    }
    let hd = expected_channel(desired, cfg)?;
    let he = expected_channel(eve, cfg)?;
    let he_n2 = he.norm_squared();
    let proj = if he_n2 > 0.0 {
        &hd - &he * (he.dotc(&hd) / he_n2)
    } else {
        hd.clone()
    };
    let pn = proj.norm();
    if pn <= 1e-9 * hd.norm() {
        return Err(Error::DegenerateGeometry(
            "desired and eavesdropper channels are parallel".into(),
        ));
    }
    let v_fd = proj.unscale(pn);
    let basis = orthonormal_complement(&hd)?;
    let t_fd = basis.columns(0, n_streams).unscale((n_streams as f64).sqrt());
    Ok(FdBeamformer {
        v_fd,
        t_fd,
        h_desired: hd,
        h_eve: he,
    })
}

/// `v_BB = V^H v_FD / ‖V^H v_FD‖`.
pub fn digital_confidential(analog: &AnalogMatrix, v_fd: &CVector) -> Result<CVector> {
    let p = analog.apply_adjoint(v_fd)?;
    let norm = p.norm();
    if norm <= 1e-14 {
        return Err(Error::DegenerateGeometry(
            "v_FD is orthogonal to the analog range".into(),
        ));
    }
    Ok(p.unscale(norm))
}

/// Column-wise `V^H T_FD`, normalized to unit Frobenius norm.
pub fn an_projection(analog: &AnalogMatrix, t_fd: &CMatrix) -> Result<CMatrix> {
    if t_fd.nrows() != analog.n_antennas() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} rows", analog.n_antennas()),
            got: format!("{} rows", t_fd.nrows()),
        });
    }
    let mut out = CMatrix::zeros(analog.n_subarrays(), t_fd.ncols());
    for (j, col) in t_fd.column_iter().enumerate() {
        out.set_column(j, &analog.apply_adjoint(&col.into_owned())?);
    }
    let norm = out.norm();
    if norm <= 1e-14 {
        return Err(Error::DegenerateGeometry(
            "T_FD is orthogonal to the analog range".into(),
        ));
    }
    Ok(out.unscale(norm))
}

/// Analog matrix, digital confidential vector, digital AN matrix and the
/// confidential power fraction β.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridBeamformer {
    pub analog: AnalogMatrix,
    pub digital_cm: CVector,
    pub digital_an: CMatrix,
    pub beta: f64,
}

const ASSEMBLY_TOLERANCE: f64 = 1e-9;

/// Validates and bundles the three stages.
pub fn assemble_hybrid(
    analog: AnalogMatrix,
    digital_cm: CVector,
    digital_an: CMatrix,
    beta: f64,
) -> Result<HybridBeamformer> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::Constraint(format!("β must lie in [0, 1], got {beta}")));
    }
    let bf = HybridBeamformer {
        analog,
        digital_cm,
        digital_an,
        beta,
    };
    let cm = bf.confidential_beam()?.norm();
    let an = bf.an_beam()?.norm();
    if (cm - 1.0).abs() > ASSEMBLY_TOLERANCE {
        return Err(Error::Constraint(format!("‖V v_BB‖ = {cm}, expected 1")));
    }
    if (an - 1.0).abs() > ASSEMBLY_TOLERANCE {
        return Err(Error::Constraint(format!("‖V T_BB‖_F = {an}, expected 1")));
    }
    let gram_err = (bf.analog.gram() - CMatrix::identity(bf.analog.n_subarrays(), bf.analog.n_subarrays())).norm();
    if gram_err > ASSEMBLY_TOLERANCE {
        return Err(Error::Constraint(format!("‖V^H V − I‖ = {gram_err}")));
    }
    Ok(bf)
}

impl HybridBeamformer {
    /// `V v_BB` (N).
    pub fn confidential_beam(&self) -> Result<CVector> {
        self.analog.apply(&self.digital_cm)
    }

    /// `V T_BB` (N x N_s).
    pub fn an_beam(&self) -> Result<CMatrix> {
        let mut out = CMatrix::zeros(self.analog.n_antennas(), self.digital_an.ncols());
        for (j, col) in self.digital_an.column_iter().enumerate() {
            out.set_column(j, &self.analog.apply(&col.into_owned())?);
        }
        Ok(out)
    }

    pub fn n_streams(&self) -> usize {
        self.digital_an.ncols()
    }

    /// Confidential and AN radiated powers for total power `p_s`.
    pub fn power_split(&self, p_s: f64) -> Result<(f64, f64)> {
        let cm = self.confidential_beam()?.norm_squared();
        let an = self.an_beam()?.norm_squared();
        Ok((self.beta * p_s * cm, (1.0 - self.beta) * p_s * an))
    }

    pub fn to_export(&self) -> BeamformerExport {
        let pair = |z: &C64| [z.re, z.im];
        BeamformerExport {
            n_antennas: self.analog.n_antennas(),
            subarray_size: self.analog.subarray_size(),
            beta: self.beta,
            analog_blocks: self
                .analog
                .blocks()
                .iter()
                .map(|b| b.iter().map(pair).collect())
                .collect(),
            digital_cm: self.digital_cm.iter().map(pair).collect(),
            digital_an: self
                .digital_an
                .row_iter()
                .map(|r| r.iter().map(pair).collect())
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_export())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let e: BeamformerExport = serde_json::from_str(s)?;
        let c = |p: &[f64; 2]| C64::new(p[0], p[1]);
        let blocks = e
            .analog_blocks
            .iter()
            .map(|b| CVector::from_iterator(b.len(), b.iter().map(c)))
            .collect();
        let analog = AnalogMatrix::from_blocks(blocks)?;
        let digital_cm = CVector::from_iterator(e.digital_cm.len(), e.digital_cm.iter().map(c));
        let rows = e.digital_an.len();
        let cols = e.digital_an.first().map(|r| r.len()).unwrap_or(0);
        if e.digital_an.iter().any(|r| r.len() != cols) {
            return Err(Error::Parse("ragged digital_an rows".into()));
        }
        let digital_an = CMatrix::from_fn(rows, cols, |i, j| c(&e.digital_an[i][j]));
        assemble_hybrid(analog, digital_cm, digital_an, e.beta)
    }
}

/// JSON layout: complex entries as `[re, im]`, `digital_an` row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamformerExport {
    pub n_antennas: usize,
    pub subarray_size: usize,
    pub beta: f64,
    pub analog_blocks: Vec<Vec<[f64; 2]>>,
    pub digital_cm: Vec<[f64; 2]>,
    pub digital_an: Vec<Vec<[f64; 2]>>,
}

fn hybrid_from_parts(
    analog: AnalogMatrix,
    fd: &FdBeamformer,
    beta: f64,
) -> Result<HybridBeamformer> {
    let v_bb = digital_confidential(&analog, &fd.v_fd)?;
    let t_bb = an_projection(&analog, &fd.t_fd)?;
    assemble_hybrid(analog, v_bb, t_bb, beta)
}

/// Baseline: phase-aligned analog stage and NSP precoders from point
/// estimates of both users.
pub fn nonrobust_hybrid(
    cfg: &ArrayConfig,
    theta_d: f64,
    theta_e: f64,
    beta: f64,
    n_streams: usize,
) -> Result<HybridBeamformer> {
    let analog = phase_aligned_analog(theta_d, cfg)?;
    let fd = fd_nsp_beamformers(
        &DirectionKnowledge::Point(theta_d),
        &DirectionKnowledge::Point(theta_e),
        cfg,
        n_streams,
    )?;
    hybrid_from_parts(analog, &fd, beta)
}

/// Robust analog stage and NSP precoders built from both users' learned
/// densities.
pub fn robust_hybrid(
    cfg: &ArrayConfig,
    bob: &GaussianDoaModel,
    eve: &GaussianDoaModel,
    beta: f64,
    n_streams: usize,
) -> Result<HybridBeamformer> {
    let analog = robust_analog_matrix(bob.mean, bob, cfg)?;
    let fd = fd_nsp_beamformers(
        &DirectionKnowledge::Learned(*bob),
        &DirectionKnowledge::Learned(*eve),
        cfg,
        n_streams,
    )?;
    hybrid_from_parts(analog, &fd, beta)
}
