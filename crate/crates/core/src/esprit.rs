//! ESPRIT direction finding on the K subarray outputs of a HAD receiver.
//!
//! Adjacent subarray phase centres sit `M·d` apart, so for `M > 1` the
//! rotation eigenvalue only fixes `cos θ` modulo `λ/(M d)`. The estimator
//! enumerates every wrap of the phase that maps to a physical angle and
//! picks the one whose re-steered beam collects the most power in fresh
//! snapshots.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::array::{check_angle, combine_with_weights, AnalogMatrix, ArrayConfig, SnapshotBatch, SnapshotSource};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, hermitian_part};
use crate::{CMatrix, CVector, C64};

/// Default band around |λ1| = 1 outside which the rotation is flagged.
pub const DEFAULT_MAGNITUDE_BAND: f64 = 0.5;

/// Sample covariance of the combined outputs and its eigendecomposition.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    pub matrix: CMatrix,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
    /// Smallest eigenvalue, used as the noise power estimate.
    pub noise_floor: f64,
    /// Set when fewer snapshots than branches were available.
    pub under_sampled: bool,
}

impl CovarianceEstimate {
    pub fn principal_eigenvector(&self) -> CVector {
        self.eigenvectors.column(0).into_owned()
    }

    /// Mean of the K-1 smallest eigenvalues (one source). Less biased than
    /// the smallest eigenvalue alone when L is not much larger than K.
    pub fn noise_subspace_power(&self) -> f64 {
        let tail = &self.eigenvalues[1.min(self.eigenvalues.len() - 1)..];
        tail.iter().sum::<f64>() / tail.len() as f64
    }
}

/// `R = (1/L)·Y Y^H` over the combined outputs of `batch`.
pub fn sample_covariance(batch: &SnapshotBatch) -> Result<CovarianceEstimate> {
    covariance_of(&batch.combined)
}

/// Covariance and spectrum of arbitrary K x L branch outputs.
pub fn covariance_of(y: &CMatrix) -> Result<CovarianceEstimate> {
    let l = y.ncols();
    if l == 0 {
        return Err(Error::InvalidArgument(
            "covariance needs at least one snapshot".into(),
        ));
    }
    let matrix = hermitian_part(&(y * y.adjoint()).unscale(l as f64));
    let eig = hermitian_eigen(&matrix)?;
    let noise_floor = *eig.eigenvalues.last().expect("non-empty spectrum");
    Ok(CovarianceEstimate {
        under_sampled: l < y.nrows(),
        matrix,
        eigenvalues: eig.eigenvalues,
        eigenvectors: eig.eigenvectors,
        noise_floor,
    })
}

/// Total-least-squares rotation between the two shifted subarray groups.
#[derive(Debug, Clone)]
pub struct SubspacePair {
    /// First K-1 entries of the signal eigenvector.
    pub e1: CVector,
    /// Last K-1 entries of the signal eigenvector.
    pub e2: CVector,
    /// `[E1 E2]^H [E1 E2]`.
    pub c: CMatrix,
    /// Eigenvectors of `c`, columns ordered by descending eigenvalue.
    pub ec: CMatrix,
    pub lambda: [f64; 2],
    pub psi: C64,
    /// Eigenvalue of Ψ; for one source Ψ is scalar and `lambda1 == psi`.
    pub lambda1: C64,
    /// |λ1| fell outside `[1 - τ, 1 + τ]`.
    pub magnitude_flag: bool,
}

pub fn tls_rotation(cov: &CovarianceEstimate) -> Result<SubspacePair> {
    tls_rotation_with_band(cov, DEFAULT_MAGNITUDE_BAND)
}

pub fn tls_rotation_with_band(cov: &CovarianceEstimate, band: f64) -> Result<SubspacePair> {
    let k = cov.matrix.nrows();
    if k < 2 {
        return Err(Error::InvalidArgument(
            "ESPRIT needs at least two subarrays".into(),
        ));
    }
    let es = cov.principal_eigenvector();
    let e1 = es.rows(0, k - 1).into_owned();
    let e2 = es.rows(1, k - 1).into_owned();
    let mut stacked = CMatrix::zeros(k - 1, 2);
    stacked.set_column(0, &e1);
    stacked.set_column(1, &e2);
    let c = hermitian_part(&(stacked.adjoint() * &stacked));
    let eig = hermitian_eigen(&c)?;
    let ec = eig.eigenvectors;
    let e12 = ec[(0, 1)];
    let e22 = ec[(1, 1)];
    if e22.norm() < 1e-14 {
        return Err(Error::DegenerateSubspace(e22.norm()));
    }
    let psi = -e12 / e22;
    let lambda1 = psi;
    let mag = lambda1.norm();
    Ok(SubspacePair {
        e1,
        e2,
        c,
        ec,
        lambda: [eig.eigenvalues[0], eig.eigenvalues[1]],
        psi,
        lambda1,
        magnitude_flag: !(1.0 - band..=1.0 + band).contains(&mag),
    })
}

/// Scale mapping a wrapped phase to `cos θ`: `λ / (2π M d)`.
fn phase_to_cos(cfg: &ArrayConfig) -> f64 {
    cfg.wavelength() / (2.0 * PI * cfg.subarray_size() as f64 * cfg.spacing())
}

/// Classical ESPRIT angle `arccos(λ·arg(λ1)/(2πMd))` in degrees.
///
/// Returns the angle and whether the arccos argument had to be clamped
/// into [-1, 1].
pub fn principal_angle(lambda1: C64, cfg: &ArrayConfig) -> Result<(f64, bool)> {
    if lambda1.norm() == 0.0 || !lambda1.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "rotation eigenvalue must be finite and nonzero, got {lambda1}"
        )));
    }
    let c = lambda1.arg() * phase_to_cos(cfg);
    let clamped = c.abs() > 1.0;
    Ok((c.clamp(-1.0, 1.0).acos().to_degrees(), clamped))
}

/// One wrap hypothesis of the inter-subarray phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub angle: f64,
    pub wrap_index: i64,
    /// Normalized received power; `None` until measured.
    pub power: Option<f64>,
}

/// All angles `arccos(λ(arg λ1 + 2πi)/(2πMd))` with a physical cosine.
///
/// The wrap index runs over every integer with |c_i| ≤ 1, which always
/// contains the true wrap regardless of the branch cut of `arg`.
pub fn candidate_angles(lambda1: C64, cfg: &ArrayConfig) -> Vec<Candidate> {
    let phase = lambda1.arg();
    let scale = phase_to_cos(cfg);
    let period = 2.0 * PI * scale;
    let lo = ((-1.0 - phase * scale) / period).ceil() as i64;
    let hi = ((1.0 - phase * scale) / period).floor() as i64;
    let mut out: Vec<Candidate> = (lo..=hi)
        .filter_map(|i| {
            let c = (phase + 2.0 * PI * i as f64) * scale;
            (c.abs() <= 1.0).then(|| Candidate {
                angle: c.acos().to_degrees(),
                wrap_index: i,
                power: None,
            })
        })
        .collect();
    if out.is_empty() {
        // Only reachable for M·d < λ/2 with a noisy phase beyond the
        // visible region; fall back to the clamped principal angle.
        let c = (phase * scale).clamp(-1.0, 1.0);
        out.push(Candidate {
            angle: c.acos().to_degrees(),
            wrap_index: 0,
            power: None,
        });
    }
    out
}

/// Result of the full estimator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DoaEstimate {
    pub principal_angle: f64,
    pub principal_clamped: bool,
    pub lambda1: C64,
    pub magnitude_flag: bool,
    pub candidates: Vec<Candidate>,
    pub selected: f64,
    pub selected_wrap_index: i64,
    pub snapshots_used: usize,
}

fn steering_stages(cfg: &ArrayConfig, theta_deg: f64) -> Result<(AnalogMatrix, CVector)> {
    let omega = cfg.phase_step(theta_deg)?;
    let m = cfg.subarray_size();
    let analog = AnalogMatrix::locally_aligned(cfg, theta_deg)?;
    let digital = CVector::from_fn(cfg.n_subarrays(), |k, _| {
        C64::from_polar(1.0, (k * m) as f64 * omega)
    });
    Ok((analog, digital))
}

fn power_of(r: &CVector, cfg: &ArrayConfig) -> f64 {
    let n = cfg.n_antennas() as f64;
    r.norm_squared() / (r.len() as f64 * n * n)
}

/// Received power after steering both analog and digital stages to θ.
///
/// `P_r = Σ|r(n)|² / (L·N²)` with analog weights aligned inside each
/// subarray and digital weights compensating the inter-subarray phase.
pub fn steered_power(raw: &CMatrix, cfg: &ArrayConfig, theta_deg: f64) -> Result<f64> {
    let (analog, digital) = steering_stages(cfg, theta_deg)?;
    let r = combine_with_weights(raw, &analog, &digital)?;
    Ok(power_of(&r, cfg))
}

/// [`steered_power`] on `l` fresh snapshots from `source`.
pub fn measure_steered_power<S: SnapshotSource + ?Sized>(
    source: &mut S,
    cfg: &ArrayConfig,
    theta_deg: f64,
    l: usize,
) -> Result<f64> {
    let (analog, digital) = steering_stages(cfg, theta_deg)?;
    let branches = source.draw_combined(&analog, l)?;
    let r = CVector::from_fn(l, |n, _| digital.dotc(&branches.column(n)));
    Ok(power_of(&r, cfg))
}

/// Measures every candidate on `l_amb` fresh snapshots and keeps the one
/// with maximal received power. A single candidate is returned without
/// drawing snapshots.
pub fn resolve_ambiguity<S: SnapshotSource + ?Sized>(
    candidates: &[Candidate],
    cfg: &ArrayConfig,
    source: &mut S,
    l_amb: usize,
) -> Result<(Vec<Candidate>, usize, usize)> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("candidate list is empty".into()));
    }
    if l_amb == 0 {
        return Err(Error::InvalidArgument("L_amb must be at least 1".into()));
    }
    let mut measured = candidates.to_vec();
    if measured.len() == 1 {
        return Ok((measured, 0, 0));
    }
    for cand in measured.iter_mut() {
        cand.power = Some(measure_steered_power(source, cfg, cand.angle, l_amb)?);
    }
    // Strict `>` keeps the lowest index on ties.
    let mut best = 0;
    for (i, cand) in measured.iter().enumerate().skip(1) {
        if cand.power > measured[best].power {
            best = i;
        }
    }
    let used = measured.len() * l_amb;
    Ok((measured, best, used))
}

/// Full pipeline: covariance → TLS rotation → candidates → disambiguation.
pub fn estimate_doa<S: SnapshotSource + ?Sized>(
    cfg: &ArrayConfig,
    batch: &SnapshotBatch,
    source: &mut S,
    l_amb: usize,
) -> Result<DoaEstimate> {
    estimate_doa_from_outputs(cfg, &batch.combined, source, l_amb)
}

/// Draws `l` zero-phase snapshots from `source` and runs [`estimate_doa`].
pub fn estimate_doa_from_source<S: SnapshotSource + ?Sized>(
    cfg: &ArrayConfig,
    source: &mut S,
    l: usize,
    l_amb: usize,
) -> Result<DoaEstimate> {
    let y = source.draw_combined(&AnalogMatrix::zero_phase(cfg), l)?;
    estimate_doa_from_outputs(cfg, &y, source, l_amb)
}

/// [`estimate_doa`] on already-combined zero-phase outputs (K x L).
pub fn estimate_doa_from_outputs<S: SnapshotSource + ?Sized>(
    cfg: &ArrayConfig,
    combined: &CMatrix,
    source: &mut S,
    l_amb: usize,
) -> Result<DoaEstimate> {
    if combined.nrows() != cfg.n_subarrays() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} branches", cfg.n_subarrays()),
            got: format!("{} rows", combined.nrows()),
        });
    }
    let cov = covariance_of(combined)?;
    let pair = tls_rotation(&cov)?;
    let (principal, clamped) = principal_angle(pair.lambda1, cfg)?;
    let candidates = candidate_angles(pair.lambda1, cfg);
    let (candidates, best, used) = resolve_ambiguity(&candidates, cfg, source, l_amb)?;
    Ok(DoaEstimate {
        principal_angle: principal,
        principal_clamped: clamped,
        lambda1: pair.lambda1,
        magnitude_flag: pair.magnitude_flag,
        selected: candidates[best].angle,
        selected_wrap_index: candidates[best].wrap_index,
        candidates,
        snapshots_used: combined.ncols() + used,
    })
}

/// Output of the post-estimation SNR estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrEstimate {
    /// Overall SNR of the aligned subarray outputs (linear).
    pub rho_hat: f64,
    /// `rho_hat / M`: the per-antenna SNR under the unit-modulus manifold.
    pub per_antenna_snr: f64,
    pub branches_used: usize,
    pub snapshots_used: usize,
}

/// Re-steers every subarray to `theta_hat`, collects `n_snapshots` fresh
/// branch vectors ŷ(n) and averages `(‖ŷ(n)‖² − Kσ̂²)/(Kσ̂²)`.
pub fn estimate_snr<S: SnapshotSource + ?Sized>(
    cfg: &ArrayConfig,
    theta_hat: f64,
    source: &mut S,
    noise_floor: f64,
    n_snapshots: usize,
) -> Result<SnrEstimate> {
    check_angle(theta_hat)?;
    if !(noise_floor.is_finite() && noise_floor > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise floor must be positive, got {noise_floor}"
        )));
    }
    if n_snapshots == 0 {
        return Err(Error::InvalidArgument("need at least one snapshot".into()));
    }
    let omega = cfg.phase_step(theta_hat)?;
    let m = cfg.subarray_size();
    let k = cfg.n_subarrays();
    let analog = AnalogMatrix::from_phases(cfg, |kk, mm| (kk * m + mm) as f64 * omega);
    let branches = source.draw_combined(&analog, n_snapshots)?;
    let denom = k as f64 * noise_floor;
    let rho_hat = branches
        .column_iter()
        .map(|y| (y.norm_squared() - denom) / denom)
        .sum::<f64>()
        / n_snapshots as f64;
    Ok(SnrEstimate {
        rho_hat,
        per_antenna_snr: rho_hat / m as f64,
        branches_used: k,
        snapshots_used: n_snapshots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{generate_snapshots, EmitterSource};
    use crate::rng::stream;

    fn noiseless_source(cfg: ArrayConfig, theta: f64, seed: u64) -> EmitterSource {
        EmitterSource::new(cfg, theta, 1.0, 0.0, stream(seed, 1)).unwrap()
    }

    fn wrap(x: f64) -> f64 {
        let y = (x + PI).rem_euclid(2.0 * PI) - PI;
        if y == -PI {
            PI
        } else {
            y
        }
    }

    #[test]
    fn noiseless_covariance_is_rank_one() {
        let cfg = ArrayConfig::half_wavelength(32, 4).unwrap();
        let batch = generate_snapshots(&cfg, 50.0, 1.0, 0.0, 64, &mut stream(1, 0)).unwrap();
        let cov = sample_covariance(&batch).unwrap();
        assert!(cov.eigenvalues[1] / cov.eigenvalues[0] < 1e-10);
        assert!((&cov.matrix - cov.matrix.adjoint()).norm() == 0.0);
        assert!(cov.matrix.trace().re >= 0.0);
        for i in 0..cov.eigenvalues.len() {
            let v = cov.eigenvectors.column(i);
            let resid = &cov.matrix * v - v * C64::new(cov.eigenvalues[i], 0.0);
            assert!(resid.norm() <= 1e-9 * cov.matrix.norm());
        }
    }

    #[test]
    fn noise_floor_tracks_noise_power() {
        let cfg = ArrayConfig::half_wavelength(32, 4).unwrap();
        let batch = generate_snapshots(&cfg, 50.0, 1.0, 0.7, 100_000, &mut stream(2, 0)).unwrap();
        let cov = sample_covariance(&batch).unwrap();
        assert!((cov.noise_floor - 0.7).abs() / 0.7 < 0.05, "{}", cov.noise_floor);
    }

    #[test]
    fn empty_batch_rejected() {
        let y = CMatrix::zeros(4, 0);
        assert!(covariance_of(&y).is_err());
    }

    #[test]
    fn rotation_phase_noiseless() {
        let cfg = ArrayConfig::half_wavelength(32, 4).unwrap();
        let batch = generate_snapshots(&cfg, 90.0, 1.0, 0.0, 16, &mut stream(3, 0)).unwrap();
        let pair = tls_rotation(&sample_covariance(&batch).unwrap()).unwrap();
        assert!((pair.lambda1 - C64::new(1.0, 0.0)).norm() < 1e-9);

        let batch = generate_snapshots(&cfg, 50.0, 1.0, 0.0, 16, &mut stream(3, 1)).unwrap();
        let pair = tls_rotation(&sample_covariance(&batch).unwrap()).unwrap();
        // Independent scalar evaluation: 2π·M·d·cos50° wrapped.
        let expect = wrap(2.0 * PI * 4.0 * 0.5 * 50f64.to_radians().cos());
        assert!((pair.lambda1.arg() - expect).abs() < 1e-9);
        assert!((expect / PI - 0.5712).abs() < 1e-3);
        assert!((pair.lambda1.norm() - 1.0).abs() < 1e-9);
        assert!(!pair.magnitude_flag);
    }

    #[test]
    fn single_subarray_rejected() {
        let cfg = ArrayConfig::half_wavelength(4, 4).unwrap();
        let batch = generate_snapshots(&cfg, 50.0, 1.0, 0.1, 8, &mut stream(3, 0)).unwrap();
        assert!(tls_rotation(&sample_covariance(&batch).unwrap()).is_err());
    }

    #[test]
    fn principal_angle_examples() {
        let cfg = ArrayConfig::half_wavelength(32, 4).unwrap();
        let (a, clamped) = principal_angle(C64::new(1.0, 0.0), &cfg).unwrap();
        assert!((a - 90.0).abs() < 1e-12 && !clamped);

        let phi = 0.5712 * PI;
        let (a, _) = principal_angle(C64::from_polar(1.0, phi), &cfg).unwrap();
        let c: f64 = 0.5712 / 4.0;
        assert!((a - c.acos().to_degrees()).abs() < 1e-9);
        assert!((a - 81.79).abs() < 0.01);
        let (b, _) = principal_angle(C64::from_polar(1.0, -phi), &cfg).unwrap();
        assert!((a + b - 180.0).abs() < 1e-9);
        assert!(principal_angle(C64::new(0.0, 0.0), &cfg).is_err());
    }

    #[test]
    fn principal_angle_clamps() {
        let cfg = ArrayConfig::new(4, 1, 0.25).unwrap();
        let (a, clamped) = principal_angle(C64::from_polar(1.0, 3.0), &cfg).unwrap();
        assert!(clamped);
        assert_eq!(a, 0.0);
    }

    #[test]
    fn candidate_examples() {
        let cfg1 = ArrayConfig::half_wavelength(8, 1).unwrap();
        assert_eq!(candidate_angles(C64::from_polar(1.0, 0.7), &cfg1).len(), 1);

        let cfg = ArrayConfig::half_wavelength(32, 4).unwrap();
        let phase = wrap(2.0 * PI * 2.0 * 50f64.to_radians().cos());
        let cands = candidate_angles(C64::from_polar(1.0, phase), &cfg);
        let c0 = phase / PI / 4.0;
        let expected: Vec<(i64, f64)> = (-2..=1)
            .map(|i| (i, (c0 + i as f64 / 2.0).acos().to_degrees()))
            .collect();
        assert_eq!(cands.len(), 4);
        for (cand, (i, angle)) in cands.iter().zip(expected) {
            assert_eq!(cand.wrap_index, i);
            assert!((cand.angle - angle).abs() < 1e-9);
        }
        // Hand-enumerated values, good to about 0.01°.
        for (c, approx) in cands.iter().zip([148.99, 110.93, 81.79, 50.0]) {
            assert!((c.angle - approx).abs() < 0.02, "{} vs {approx}", c.angle);
        }

        // every candidate reproduces the measured phase
        for c in &cands {
            let back = 2.0 * PI * 4.0 * 0.5 * c.angle.to_radians().cos();
            assert!((wrap(back) - phase).abs() < 1e-9);
        }
    }

    #[test]
    fn candidate_count_is_m_or_m_plus_one() {
        for m in [1usize, 2, 4, 8, 16] {
            let cfg = ArrayConfig::half_wavelength(64, m).unwrap();
            for i in 0..200 {
                let phase = -PI + 2.0 * PI * (i as f64 + 0.5) / 200.0;
                let n = candidate_angles(C64::from_polar(1.0, phase), &cfg).len();
                assert!(n == m || n == m + 1, "m={m} n={n}");
            }
        }
    }

    #[test]
    fn true_angle_is_always_a_candidate() {
        let cfg = ArrayConfig::half_wavelength(32, 4).unwrap();
        for deg in 1..180 {
            let theta = deg as f64;
            let batch = generate_snapshots(&cfg, theta, 1.0, 0.0, 8, &mut stream(9, deg)).unwrap();
            let pair = tls_rotation(&sample_covariance(&batch).unwrap()).unwrap();
            let cands = candidate_angles(pair.lambda1, &cfg);
            let best = cands
                .iter()
                .map(|c| (c.angle - theta).abs())
                .fold(f64::INFINITY, f64::min);
            assert!(best < 1e-6, "θ0={theta} best={best}");
        }
    }

    #[test]
    fn noiseless_resolution_picks_true_angle() {
        let cfg = ArrayConfig::half_wavelength(32, 4).unwrap();
        let batch = generate_snapshots(&cfg, 50.0, 1.0, 0.0, 64, &mut stream(5, 0)).unwrap();
        let mut src = noiseless_source(cfg, 50.0, 5);
        let est = estimate_doa(&cfg, &batch, &mut src, 64).unwrap();
        assert!((est.selected - 50.0).abs() < 1e-6);
        assert_eq!(est.snapshots_used, 64 + est.candidates.len() * 64);
        let best = est.candidates.iter().filter_map(|c| c.power).fold(0.0, f64::max);
        let at_truth = est
            .candidates
            .iter()
            .find(|c| (c.angle - 50.0).abs() < 1e-6)
            .and_then(|c| c.power)
            .unwrap();
        assert_eq!(best, at_truth);
    }

    #[test]
    fn single_candidate_is_returned_without_measuring() {
        let cfg = ArrayConfig::half_wavelength(8, 1).unwrap();
        let mut src = noiseless_source(cfg, 30.0, 1);
        let cands = vec![Candidate {
            angle: 30.0,
            wrap_index: 0,
            power: None,
        }];
        let (out, best, used) = resolve_ambiguity(&cands, &cfg, &mut src, 16).unwrap();
        assert_eq!((best, used), (0, 0));
        assert_eq!(out[0].angle, 30.0);
        assert!(resolve_ambiguity(&[], &cfg, &mut src, 16).is_err());
        assert!(resolve_ambiguity(&cands, &cfg, &mut src, 0).is_err());
    }

    #[test]
    fn snr_estimator_noise_only_and_phase_invariance() {
        let cfg = ArrayConfig::half_wavelength(16, 4).unwrap();
        let mut src = EmitterSource::new(cfg, 40.0, 0.0, 1.0, stream(6, 0)).unwrap();
        let est = estimate_snr(&cfg, 40.0, &mut src, 1.0, 20_000).unwrap();
        assert!(est.rho_hat.abs() < 0.05, "{}", est.rho_hat);
        assert!(est.rho_hat >= -1.0);
        assert!(estimate_snr(&cfg, 40.0, &mut src, 0.0, 10).is_err());
    }

    #[test]
    fn snr_estimator_aligned_gain() {
        let cfg = ArrayConfig::half_wavelength(16, 4).unwrap();
        let mut src = EmitterSource::new(cfg, 40.0, 1.0, 1.0, stream(7, 0)).unwrap();
        let est = estimate_snr(&cfg, 40.0, &mut src, 1.0, 10_000).unwrap();
        assert!((3.8..=4.2).contains(&est.rho_hat), "{}", est.rho_hat);
        assert!((est.per_antenna_snr - est.rho_hat / 4.0).abs() < 1e-15);
    }
}
