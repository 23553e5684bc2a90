//! Python bindings for the simulator.
//!
//! Monte Carlo entry points release the GIL while they run.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use had_dm::array::{effective_steering, receive_manifold};
use had_dm::beamformer::{nonrobust_hybrid, robust_hybrid};
use had_dm::density::{truncated_pdf, WeightMethod};
use had_dm::perf::{
    density_experiment, dm_comparison, gray_qpsk_ber, rmse_sweep, secrecy_rate, DensitySetup, DmSetup,
    EstimatorSetup, LinkScenario, StageSetup,
};
use had_dm::rng::stream;
use had_dm::{C64, SweepResult};

fn py_err(e: had_dm::Error) -> PyErr {
    PyValueError::new_err(format!("{}: {e}", e.origin()))
}

#[pyclass(name = "ArrayConfig", module = "had_dm_py", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyArrayConfig(had_dm::ArrayConfig);

#[pymethods]
impl PyArrayConfig {
    #[new]
    #[pyo3(signature = (n_antennas, subarray_size, spacing = 0.5, wavelength = 1.0))]
    fn new(n_antennas: usize, subarray_size: usize, spacing: f64, wavelength: f64) -> PyResult<Self> {
        had_dm::ArrayConfig::with_wavelength(n_antennas, subarray_size, spacing, wavelength)
            .map(Self)
            .map_err(py_err)
    }

    #[getter]
    fn n_antennas(&self) -> usize {
        self.0.n_antennas()
    }

    #[getter]
    fn subarray_size(&self) -> usize {
        self.0.subarray_size()
    }

    #[getter]
    fn n_subarrays(&self) -> usize {
        self.0.n_subarrays()
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.0.spacing()
    }

    #[getter]
    fn wavelength(&self) -> f64 {
        self.0.wavelength()
    }

    /// Full-array receive manifold at `theta` degrees.
    fn receive_manifold(&self, theta: f64) -> PyResult<Vec<C64>> {
        Ok(receive_manifold(&self.0, theta).map_err(py_err)?.iter().copied().collect())
    }

    /// Zero-phase combined manifold, one entry per subarray.
    fn effective_steering(&self, theta: f64) -> PyResult<Vec<C64>> {
        Ok(effective_steering(&self.0, theta).map_err(py_err)?.iter().copied().collect())
    }

    fn __repr__(&self) -> String {
        format!(
            "ArrayConfig(n_antennas={}, subarray_size={}, spacing={}, wavelength={})",
            self.0.n_antennas(),
            self.0.subarray_size(),
            self.0.spacing(),
            self.0.wavelength()
        )
    }
}

#[pyclass(name = "GaussianDoaModel", module = "had_dm_py", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyDoaModel(had_dm::GaussianDoaModel);

#[pymethods]
impl PyDoaModel {
    #[new]
    fn new(mean: f64, variance: f64, delta_max: f64) -> PyResult<Self> {
        had_dm::GaussianDoaModel::new(mean, variance, delta_max)
            .map(Self)
            .map_err(py_err)
    }

    #[getter]
    fn mean(&self) -> f64 {
        self.0.mean
    }

    #[getter]
    fn variance(&self) -> f64 {
        self.0.variance
    }

    #[getter]
    fn delta_max(&self) -> f64 {
        self.0.delta_max
    }

    #[getter]
    fn truncation(&self) -> f64 {
        self.0.truncation
    }

    /// Truncated density of the error `delta` (degrees).
    fn pdf(&self, delta: f64) -> f64 {
        truncated_pdf(&self.0, delta)
    }

    fn __repr__(&self) -> String {
        format!(
            "GaussianDoaModel(mean={}, variance={}, delta_max={})",
            self.0.mean, self.0.variance, self.0.delta_max
        )
    }
}

#[pyclass(name = "HybridBeamformer", module = "had_dm_py", frozen)]
struct PyHybrid {
    cfg: had_dm::ArrayConfig,
    inner: had_dm::HybridBeamformer,
}

#[pymethods]
impl PyHybrid {
    /// Phase-aligned analog stage and NSP precoders from point estimates.
    #[staticmethod]
    #[pyo3(signature = (cfg, theta_d, theta_e, beta = 0.9, n_streams = None))]
    fn nonrobust(cfg: PyArrayConfig, theta_d: f64, theta_e: f64, beta: f64, n_streams: Option<usize>) -> PyResult<Self> {
        let ns = n_streams.unwrap_or(cfg.0.n_subarrays());
        let inner = nonrobust_hybrid(&cfg.0, theta_d, theta_e, beta, ns).map_err(py_err)?;
        Ok(Self { cfg: cfg.0, inner })
    }

    /// Robust design from the learned densities of both users.
    #[staticmethod]
    #[pyo3(signature = (cfg, bob, eve, beta = 0.9, n_streams = None))]
    fn robust(cfg: PyArrayConfig, bob: PyDoaModel, eve: PyDoaModel, beta: f64, n_streams: Option<usize>) -> PyResult<Self> {
        let ns = n_streams.unwrap_or(cfg.0.n_subarrays());
        let inner = robust_hybrid(&cfg.0, &bob.0, &eve.0, beta, ns).map_err(py_err)?;
        Ok(Self { cfg: cfg.0, inner })
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    /// `V v_BB`, length N.
    fn confidential_beam(&self) -> PyResult<Vec<C64>> {
        Ok(self.inner.confidential_beam().map_err(py_err)?.iter().copied().collect())
    }

    /// Rates at the exact angles for per-antenna SNR `snr_db` (σ² = 1).
    fn secrecy_rate<'py>(&self, py: Python<'py>, theta_d: f64, theta_e: f64, snr_db: f64) -> PyResult<Bound<'py, PyDict>> {
        let sc = LinkScenario::from_snr_db(self.cfg, self.inner.clone(), theta_d, theta_e, snr_db).map_err(py_err)?;
        let r = secrecy_rate(&sc, theta_d, theta_e).map_err(py_err)?;
        let d = PyDict::new(py);
        d.set_item("r_desired", r.r_desired)?;
        d.set_item("r_eve", r.r_eve)?;
        d.set_item("secrecy", r.secrecy)?;
        Ok(d)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(py_err)
    }
}

fn sweep_dict<'py>(py: Python<'py>, s: &SweepResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("axis_label", &s.axis_label)?;
    d.set_item("axis", s.axis.clone())?;
    let series = PyDict::new(py);
    for ser in &s.series {
        let e = PyDict::new(py);
        e.set_item("mean", ser.points.iter().map(|p| p.mean).collect::<Vec<_>>())?;
        e.set_item("std_error", ser.points.iter().map(|p| p.std_error).collect::<Vec<_>>())?;
        e.set_item("n_trials", ser.points.iter().map(|p| p.n_trials).collect::<Vec<_>>())?;
        series.set_item(&ser.name, e)?;
    }
    d.set_item("series", series)?;
    Ok(d)
}

/// One seeded DOA estimate; `snr_db=None` runs noiseless.
#[pyfunction]
#[pyo3(signature = (cfg, theta, snr_db = None, n_snapshots = 64, l_amb = 64, seed = 0))]
fn estimate_doa<'py>(
    py: Python<'py>,
    cfg: PyArrayConfig,
    theta: f64,
    snr_db: Option<f64>,
    n_snapshots: usize,
    l_amb: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let setup = EstimatorSetup {
        n_snapshots,
        l_amb,
        ..EstimatorSetup::new(cfg.0, theta, snr_db)
    };
    let est = setup.estimate(stream(seed, 0)).map_err(py_err)?;
    let d = PyDict::new(py);
    d.set_item("selected", est.selected)?;
    d.set_item("selected_wrap_index", est.selected_wrap_index)?;
    d.set_item("principal_angle", est.principal_angle)?;
    d.set_item(
        "candidates",
        est.candidates.iter().map(|c| (c.wrap_index, c.angle, c.power)).collect::<Vec<_>>(),
    )?;
    Ok(d)
}

/// RMSE and bias of the estimator over an SNR grid.
#[pyfunction]
#[pyo3(signature = (cfg, snr_grid, n_trials = 200, theta = 50.0, seed = 0))]
fn rmse_curve<'py>(py: Python<'py>, cfg: PyArrayConfig, snr_grid: Vec<f64>, n_trials: usize, theta: f64, seed: u64) -> PyResult<Bound<'py, PyDict>> {
    let setup = EstimatorSetup::new(cfg.0, theta, None);
    let s = py.detach(|| rmse_sweep(&setup, &snr_grid, n_trials, seed)).map_err(py_err)?;
    sweep_dict(py, &s)
}

/// Learns the DOA-error density from TDS and RTS measurement sets.
#[pyfunction]
#[pyo3(signature = (cfg, theta, snr_tds_db, snr_rts_db, n_tds = 1000, n_rts = 10, method = "III", seed = 0))]
#[allow(clippy::too_many_arguments)]
fn learn_density(
    py: Python<'_>,
    cfg: PyArrayConfig,
    theta: f64,
    snr_tds_db: f64,
    snr_rts_db: f64,
    n_tds: usize,
    n_rts: usize,
    method: &str,
    seed: u64,
) -> PyResult<PyDoaModel> {
    let method = match method {
        "I" => WeightMethod::Snr,
        "II" => WeightMethod::Count,
        "III" => WeightMethod::SnrCount,
        other => return Err(PyValueError::new_err(format!("unknown weight method {other:?}"))),
    };
    let mut setup = DensitySetup::new(EstimatorSetup::new(cfg.0, theta, None), snr_tds_db, snr_rts_db);
    setup.tds = StageSetup {
        snr_db: snr_tds_db,
        n_measurements: n_tds,
    };
    setup.rts = StageSetup {
        snr_db: snr_rts_db,
        n_measurements: n_rts,
    };
    setup.method = method;
    let out = py.detach(|| density_experiment(&setup, seed)).map_err(py_err)?;
    Ok(PyDoaModel(out.model))
}

/// Robust vs non-robust secrecy rate and BER over an SNR grid.
#[pyfunction]
#[pyo3(signature = (cfg, bob, eve, snr_grid, beta = 0.9, n_draws = 500, bits_per_draw = 2000, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn dm_curves<'py>(
    py: Python<'py>,
    cfg: PyArrayConfig,
    bob: PyDoaModel,
    eve: PyDoaModel,
    snr_grid: Vec<f64>,
    beta: f64,
    n_draws: usize,
    bits_per_draw: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let setup = DmSetup {
        cfg: cfg.0,
        bob: bob.0,
        eve: eve.0,
        beta,
        n_streams: cfg.0.n_subarrays(),
        snr_grid,
        n_draws,
        bits_per_draw,
    };
    let s = py.detach(|| dm_comparison(&setup, seed)).map_err(py_err)?;
    sweep_dict(py, &s)
}

/// Gaussian tail probability.
#[pyfunction]
fn q_function(x: f64) -> f64 {
    had_dm::special::q_function(x)
}

/// Gray-QPSK bit error probability at symbol SNR `gamma` (linear).
#[pyfunction]
fn qpsk_ber(gamma: f64) -> f64 {
    gray_qpsk_ber(gamma)
}

#[pymodule]
fn had_dm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyArrayConfig>()?;
    m.add_class::<PyDoaModel>()?;
    m.add_class::<PyHybrid>()?;
    m.add_function(wrap_pyfunction!(estimate_doa, m)?)?;
    m.add_function(wrap_pyfunction!(rmse_curve, m)?)?;
    m.add_function(wrap_pyfunction!(learn_density, m)?)?;
    m.add_function(wrap_pyfunction!(dm_curves, m)?)?;
    m.add_function(wrap_pyfunction!(q_function, m)?)?;
    m.add_function(wrap_pyfunction!(qpsk_ber, m)?)?;
    Ok(())
}
