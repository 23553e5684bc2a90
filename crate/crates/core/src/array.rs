//! Array geometry, steering vectors and the HAD receive model.
//!
//! Two steering conventions coexist:
//!
//! * the receive manifold `a(θ)` has unit-modulus entries and phase
//!   reference at the first antenna; it drives DOA and SNR estimation.
//! * the transmit channel row `h^H(θ)` is phase-centred on the array and
//!   each entry carries `1/√M`; it drives directional modulation.
//!
//! Where the two meet (the SNR estimator) the aligned analog gain is `√M`
//! per subarray instead of 1.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{complex_gaussian, SimRng};
use crate::{CMatrix, CVector, C64};

/// Geometry of a sub-connected HAD uniform linear array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    n_antennas: usize,
    subarray_size: usize,
    spacing: f64,
    wavelength: f64,
}

impl ArrayConfig {
    /// `spacing` is in wavelengths (the wavelength is normalized to 1).
    pub fn new(n_antennas: usize, subarray_size: usize, spacing: f64) -> Result<Self> {
        Self::with_wavelength(n_antennas, subarray_size, spacing, 1.0)
    }

    /// Half-wavelength spacing.
    pub fn half_wavelength(n_antennas: usize, subarray_size: usize) -> Result<Self> {
        Self::new(n_antennas, subarray_size, 0.5)
    }

    pub fn with_wavelength(
        n_antennas: usize,
        subarray_size: usize,
        spacing: f64,
        wavelength: f64,
    ) -> Result<Self> {
        if n_antennas == 0 || subarray_size == 0 {
            return Err(Error::InvalidConfig(
                "N and M must be positive integers".into(),
            ));
        }
        if n_antennas % subarray_size != 0 {
            return Err(Error::InvalidConfig(format!(
                "N not divisible by M (N={n_antennas}, M={subarray_size})"
            )));
        }
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "wavelength must be positive, got {wavelength}"
            )));
        }
        if !(spacing.is_finite() && spacing > 0.0 && spacing <= wavelength / 2.0 + 1e-15) {
            return Err(Error::InvalidConfig(format!(
                "spacing must satisfy 0 < d <= λ/2, got d={spacing}, λ={wavelength}"
            )));
        }
        Ok(Self {
            n_antennas,
            subarray_size,
            spacing,
            wavelength,
        })
    }

    pub fn n_antennas(&self) -> usize {
        self.n_antennas
    }

    pub fn subarray_size(&self) -> usize {
        self.subarray_size
    }

    pub fn n_subarrays(&self) -> usize {
        self.n_antennas / self.subarray_size
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    /// `2πd/λ`, the inter-element phase per unit of `cos θ`.
    pub fn wavenumber_spacing(&self) -> f64 {
        2.0 * PI * self.spacing / self.wavelength
    }

    /// Inter-element phase step `Ω(θ) = 2πd cos θ / λ` (θ in degrees).
    pub fn phase_step(&self, theta_deg: f64) -> Result<f64> {
        check_angle(theta_deg)?;
        Ok(self.wavenumber_spacing() * theta_deg.to_radians().cos())
    }
}

pub(crate) fn check_angle(theta_deg: f64) -> Result<()> {
    if theta_deg.is_finite() && (0.0..=180.0).contains(&theta_deg) {
        Ok(())
    } else {
        Err(Error::AngleDomain(theta_deg))
    }
}

/// Unit-modulus receive manifold `a(θ)`, entry n = exp(j·2π/λ·n·d·cos θ).
pub fn receive_manifold(cfg: &ArrayConfig, theta_deg: f64) -> Result<CVector> {
    let omega = cfg.phase_step(theta_deg)?;
    Ok(CVector::from_fn(cfg.n_antennas(), |n, _| {
        C64::from_polar(1.0, n as f64 * omega)
    }))
}

/// Phase-centred transmit steering row `h^H(θ)`.
///
/// Entry with 1-based global index g = (k-1)M + m is
/// `(1/√M)·exp(j·(g - (N+1)/2)·Ω(θ))`. The column channel vector `h(θ)` is
/// its element-wise conjugate (see [`channel_vector`]).
pub fn centered_steering(cfg: &ArrayConfig, theta_deg: f64) -> Result<CVector> {
    let omega = cfg.phase_step(theta_deg)?;
    let n = cfg.n_antennas();
    let amp = 1.0 / (cfg.subarray_size() as f64).sqrt();
    let centre = (n as f64 - 1.0) / 2.0;
    Ok(CVector::from_fn(n, |i, _| {
        C64::from_polar(amp, (i as f64 - centre) * omega)
    }))
}

/// Column channel vector `h(θ)`, the conjugate of [`centered_steering`].
pub fn channel_vector(cfg: &ArrayConfig, theta_deg: f64) -> Result<CVector> {
    Ok(centered_steering(cfg, theta_deg)?.map(|z| z.conj()))
}

/// Channel gain `h^H(θ)·x` for a transmit vector `x`.
pub fn channel_gain(cfg: &ArrayConfig, theta_deg: f64, x: &CVector) -> Result<C64> {
    let row = centered_steering(cfg, theta_deg)?;
    if x.len() != row.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("length {}", row.len()),
            got: format!("length {}", x.len()),
        });
    }
    Ok(row.iter().zip(x.iter()).map(|(a, b)| a * b).sum())
}

/// Intra-subarray array factor `f(θ) = Σ_{m=0}^{M-1} e^{j m Ω(θ)}`.
pub fn subarray_factor(cfg: &ArrayConfig, theta_deg: f64) -> Result<C64> {
    let omega = cfg.phase_step(theta_deg)?;
    Ok((0..cfg.subarray_size())
        .map(|m| C64::from_polar(1.0, m as f64 * omega))
        .sum())
}

/// Effective K-branch steering `a_D(θ)` after zero-phase analog combining.
pub fn effective_steering(cfg: &ArrayConfig, theta_deg: f64) -> Result<CVector> {
    let omega = cfg.phase_step(theta_deg)?;
    let f = subarray_factor(cfg, theta_deg)?;
    let m = cfg.subarray_size();
    let gain = f / (m as f64).sqrt();
    Ok(CVector::from_fn(cfg.n_subarrays(), |k, _| {
        gain * C64::from_polar(1.0, (k * m) as f64 * omega)
    }))
}

/// Block-diagonal constant-modulus analog matrix, stored as its K blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalogMatrix {
    blocks: Vec<CVector>,
}

/// Allowed relative deviation of an entry modulus from `1/√M`.
const MODULUS_TOLERANCE: f64 = 1e-12;

impl AnalogMatrix {
    /// Validates that every block has length M and entries of modulus 1/√M.
    pub fn from_blocks(blocks: Vec<CVector>) -> Result<Self> {
        let m = blocks.first().map(|b| b.len()).unwrap_or(0);
        if m == 0 {
            return Err(Error::InvalidArgument(
                "analog matrix needs at least one non-empty block".into(),
            ));
        }
        let target = 1.0 / (m as f64).sqrt();
        for (k, b) in blocks.iter().enumerate() {
            if b.len() != m {
                return Err(Error::ShapeMismatch {
                    expected: format!("block length {m}"),
                    got: format!("block {k} of length {}", b.len()),
                });
            }
            if let Some(z) = b
                .iter()
                .find(|z| ((z.norm() - target) / target).abs() > MODULUS_TOLERANCE)
            {
                return Err(Error::Constraint(format!(
                    "analog entry modulus {} differs from 1/sqrt(M) = {target}",
                    z.norm()
                )));
            }
        }
        Ok(Self { blocks })
    }

    /// Builds the matrix from per-element phases, `phase(k, m)` with 0-based
    /// subarray index k and local element index m.
    pub fn from_phases(cfg: &ArrayConfig, phase: impl Fn(usize, usize) -> f64) -> Self {
        let m = cfg.subarray_size();
        let amp = 1.0 / (m as f64).sqrt();
        let blocks = (0..cfg.n_subarrays())
            .map(|k| CVector::from_fn(m, |i, _| C64::from_polar(amp, phase(k, i))))
            .collect();
        Self { blocks }
    }

    /// All phases zero: every subarray sums its elements.
    pub fn zero_phase(cfg: &ArrayConfig) -> Self {
        Self::from_phases(cfg, |_, _| 0.0)
    }

    /// Receive weights phase-aligned to θ within each subarray, referenced to
    /// the subarray's first element: `f_k[m] = e^{j m Ω(θ)}/√M`.
    pub fn locally_aligned(cfg: &ArrayConfig, theta_deg: f64) -> Result<Self> {
        let omega = cfg.phase_step(theta_deg)?;
        Ok(Self::from_phases(cfg, |_, m| m as f64 * omega))
    }

    pub fn n_subarrays(&self) -> usize {
        self.blocks.len()
    }

    pub fn subarray_size(&self) -> usize {
        self.blocks[0].len()
    }

    pub fn n_antennas(&self) -> usize {
        self.n_subarrays() * self.subarray_size()
    }

    pub fn blocks(&self) -> &[CVector] {
        &self.blocks
    }

    /// Dense N x K representation.
    pub fn to_dense(&self) -> CMatrix {
        let m = self.subarray_size();
        let mut out = CMatrix::zeros(self.n_antennas(), self.n_subarrays());
        for (k, b) in self.blocks.iter().enumerate() {
            out.view_mut((k * m, k), (m, 1)).copy_from(b);
        }
        out
    }

    /// `F^H F`, which is I_K for any valid instance.
    pub fn gram(&self) -> CMatrix {
        let d = self.to_dense();
        d.adjoint() * d
    }

    fn check_rows(&self, rows: usize) -> Result<()> {
        if rows != self.n_antennas() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} rows", self.n_antennas()),
                got: format!("{rows} rows"),
            });
        }
        Ok(())
    }

    /// `F^H X` for an N x L matrix X, computed block-wise.
    pub fn combine(&self, x: &CMatrix) -> Result<CMatrix> {
        self.check_rows(x.nrows())?;
        let m = self.subarray_size();
        let mut out = CMatrix::zeros(self.n_subarrays(), x.ncols());
        for (k, b) in self.blocks.iter().enumerate() {
            let rows = x.rows(k * m, m);
            for l in 0..x.ncols() {
                out[(k, l)] = b.dotc(&rows.column(l));
            }
        }
        Ok(out)
    }

    /// `F v` for a length-K vector v.
    pub fn apply(&self, v: &CVector) -> Result<CVector> {
        if v.len() != self.n_subarrays() {
            return Err(Error::ShapeMismatch {
                expected: format!("length {}", self.n_subarrays()),
                got: format!("length {}", v.len()),
            });
        }
        let m = self.subarray_size();
        Ok(CVector::from_fn(self.n_antennas(), |i, _| {
            self.blocks[i / m][i % m] * v[i / m]
        }))
    }

    /// `F^H x` for a length-N vector x.
    pub fn apply_adjoint(&self, x: &CVector) -> Result<CVector> {
        self.check_rows(x.len())?;
        let m = self.subarray_size();
        Ok(CVector::from_fn(self.n_subarrays(), |k, _| {
            self.blocks[k].dotc(&x.rows(k * m, m))
        }))
    }
}

/// Per-antenna samples plus their zero-phase analog combination.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotBatch {
    /// N x L per-antenna baseband samples.
    pub raw: CMatrix,
    /// K x L samples after zero-phase analog combining.
    pub combined: CMatrix,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl SnapshotBatch {
    pub fn n_snapshots(&self) -> usize {
        self.raw.ncols()
    }

    /// Multiplies every sample by `c` (both raw and combined views).
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            raw: self.raw.scale(c),
            combined: self.combined.scale(c),
            signal_variance: self.signal_variance * c * c,
            noise_variance: self.noise_variance * c * c,
        }
    }
}

/// Draws L snapshots of a single far-field emitter at `theta_deg`.
///
/// s(n) is circular complex Gaussian with variance `signal_variance`; the
/// receiver adds i.i.d. circular complex Gaussian noise of variance
/// `noise_variance` on every antenna before analog combining.
pub fn generate_snapshots<R: Rng + ?Sized>(
    cfg: &ArrayConfig,
    theta_deg: f64,
    signal_variance: f64,
    noise_variance: f64,
    n_snapshots: usize,
    rng: &mut R,
) -> Result<SnapshotBatch> {
    if !(signal_variance.is_finite() && signal_variance >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "signal variance must be finite and >= 0, got {signal_variance}"
        )));
    }
    if !(noise_variance.is_finite() && noise_variance >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "noise variance must be finite and >= 0, got {noise_variance}"
        )));
    }
    if n_snapshots == 0 {
        return Err(Error::InvalidArgument("L must be at least 1".into()));
    }
    let a = receive_manifold(cfg, theta_deg)?;
    let analog = AnalogMatrix::zero_phase(cfg);
    let gain = branch_gain(&analog, cfg, theta_deg)?;
    let n = cfg.n_antennas();
    let mut raw = CMatrix::zeros(n, n_snapshots);
    let mut noise = CMatrix::zeros(n, n_snapshots);
    let mut symbols = Vec::with_capacity(n_snapshots);
    for l in 0..n_snapshots {
        let s = complex_gaussian(rng, signal_variance);
        symbols.push(s);
        for i in 0..n {
            raw[(i, l)] = a[i] * s;
            if noise_variance > 0.0 {
                let w = complex_gaussian(rng, noise_variance);
                noise[(i, l)] = w;
                raw[(i, l)] += w;
            }
        }
    }
    let mut combined = analog.combine(&noise)?;
    for (l, s) in symbols.iter().enumerate() {
        for k in 0..gain.len() {
            combined[(k, l)] += gain[k] * s;
        }
    }
    Ok(SnapshotBatch {
        raw,
        combined,
        signal_variance,
        noise_variance,
    })
}

/// `F^H a(θ)` evaluated block by block as `e^{jkMΩ}·(f_k^H a_M(θ))`.
///
/// Equal to `analog.apply_adjoint(&receive_manifold(..))`, but the common
/// factor keeps the inter-subarray phase progression exact even where the
/// intra-subarray sum cancels (e.g. the grating nulls of zero-phase
/// combining).
pub fn branch_gain(analog: &AnalogMatrix, cfg: &ArrayConfig, theta_deg: f64) -> Result<CVector> {
    if analog.n_antennas() != cfg.n_antennas() || analog.subarray_size() != cfg.subarray_size() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} x {} analog stage", cfg.n_antennas(), cfg.n_subarrays()),
            got: format!("{} x {}", analog.n_antennas(), analog.n_subarrays()),
        });
    }
    let omega = cfg.phase_step(theta_deg)?;
    let m = cfg.subarray_size();
    let local: Vec<C64> = (0..m).map(|i| C64::from_polar(1.0, i as f64 * omega)).collect();
    Ok(CVector::from_iterator(
        analog.n_subarrays(),
        analog.blocks().iter().enumerate().map(|(k, b)| {
            let inner: C64 = b.iter().zip(&local).map(|(f, x)| f.conj() * x).sum();
            C64::from_polar(1.0, (k * m) as f64 * omega) * inner
        }),
    ))
}

/// Digital-then-analog combining: `r(n) = w^H F^H x(n)` for each column.
pub fn combine_with_weights(
    raw: &CMatrix,
    analog: &AnalogMatrix,
    digital: &CVector,
) -> Result<CVector> {
    let branches = analog.combine(raw)?;
    if digital.len() != branches.nrows() {
        return Err(Error::ShapeMismatch {
            expected: format!("digital length {}", branches.nrows()),
            got: format!("length {}", digital.len()),
        });
    }
    Ok(CVector::from_fn(raw.ncols(), |l, _| {
        digital.dotc(&branches.column(l))
    }))
}

/// Anything that can deliver fresh snapshot batches on demand, e.g. the
/// next time slots of a live receiver.
pub trait SnapshotSource {
    fn array(&self) -> &ArrayConfig;
    fn draw(&mut self, n_snapshots: usize) -> Result<SnapshotBatch>;

    /// K x L outputs `F^H x(n)` of the given analog stage on fresh snapshots.
    fn draw_combined(&mut self, analog: &AnalogMatrix, n_snapshots: usize) -> Result<CMatrix> {
        let batch = self.draw(n_snapshots)?;
        analog.combine(&batch.raw)
    }
}

/// Simulated single emitter with its own random stream.
#[derive(Debug, Clone)]
pub struct EmitterSource {
    cfg: ArrayConfig,
    theta_deg: f64,
    signal_variance: f64,
    noise_variance: f64,
    rng: SimRng,
}

impl EmitterSource {
    pub fn new(
        cfg: ArrayConfig,
        theta_deg: f64,
        signal_variance: f64,
        noise_variance: f64,
        rng: SimRng,
    ) -> Result<Self> {
        check_angle(theta_deg)?;
        Ok(Self {
            cfg,
            theta_deg,
            signal_variance,
            noise_variance,
            rng,
        })
    }

    /// Unit noise variance and the given per-antenna SNR in dB.
    pub fn at_snr_db(cfg: ArrayConfig, theta_deg: f64, snr_db: f64, rng: SimRng) -> Result<Self> {
        Self::new(cfg, theta_deg, crate::db_to_linear(snr_db), 1.0, rng)
    }

    pub fn theta_deg(&self) -> f64 {
        self.theta_deg
    }
}

impl SnapshotSource for EmitterSource {
    fn array(&self) -> &ArrayConfig {
        &self.cfg
    }

    fn draw(&mut self, n_snapshots: usize) -> Result<SnapshotBatch> {
        generate_snapshots(
            &self.cfg,
            self.theta_deg,
            self.signal_variance,
            self.noise_variance,
            n_snapshots,
            &mut self.rng,
        )
    }

    /// Draws in the branch domain: since `F^H F = I`, `F^H n` is again
    /// i.i.d. with variance σ², so `F^H a·s + F^H n` has the same law as the
    /// combined full-array draw at a fraction of the cost.
    fn draw_combined(&mut self, analog: &AnalogMatrix, n_snapshots: usize) -> Result<CMatrix> {
        if analog.n_antennas() != self.cfg.n_antennas() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} antennas", self.cfg.n_antennas()),
                got: format!("{} antennas", analog.n_antennas()),
            });
        }
        if n_snapshots == 0 {
            return Err(Error::InvalidArgument("L must be at least 1".into()));
        }
        let gain = branch_gain(analog, &self.cfg, self.theta_deg)?;
        let k = gain.len();
        let mut out = CMatrix::zeros(k, n_snapshots);
        for l in 0..n_snapshots {
            let s = complex_gaussian(&mut self.rng, self.signal_variance);
            for i in 0..k {
                out[(i, l)] = gain[i] * s;
                if self.noise_variance > 0.0 {
                    out[(i, l)] += complex_gaussian(&mut self.rng, self.noise_variance);
                }
            }
        }
        Ok(out)
    }
}
