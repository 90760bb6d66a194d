//! Python bindings for the `maxwell1d` solver.
//!
//! Numerical failures raise `NumericalError`, file problems raise `OSError`
//! and everything else raises `ValueError`.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use maxwell1d::{lyapunov, metrics, moments, params, physical, solver, steady, Complex64, Error};

create_exception!(maxwell1d_py, NumericalError, PyRuntimeError);

fn to_py(e: Error) -> PyErr {
    if e.is_numerical() {
        NumericalError::new_err(e.to_string())
    } else if e.is_io() {
        PyOSError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn parse_kind(kind: &str) -> PyResult<maxwell1d::StateKind> {
    kind.parse().map_err(|e: String| PyValueError::new_err(e))
}

fn parse_scheme(scheme: &str) -> PyResult<solver::Scheme> {
    scheme.parse().map_err(|e: String| PyValueError::new_err(e))
}

/// Collision parameters `0 < q <= p`.
#[pyclass(name = "MixingParams", frozen, from_py_object)]
#[derive(Clone, Copy)]
pub struct PyMixingParams(maxwell1d::MixingParams);

#[pymethods]
impl PyMixingParams {
    #[new]
    fn new(p: f64, q: f64) -> PyResult<Self> {
        maxwell1d::MixingParams::new(p, q).map(Self).map_err(to_py)
    }

    #[getter]
    fn p(&self) -> f64 {
        self.0.p()
    }

    #[getter]
    fn q(&self) -> f64 {
        self.0.q()
    }

    #[getter]
    fn regime(&self) -> &'static str {
        self.0.regime().as_str()
    }

    fn is_elastic(&self) -> bool {
        self.0.is_elastic()
    }

    /// `{"regime", "r", "lambda", "delta_tilde", "admissible"}`, with `None` where undefined.
    fn classify<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let rep = params::classify(&self.0);
        let d = PyDict::new(py);
        d.set_item("regime", rep.regime.as_str())?;
        d.set_item("r", rep.r)?;
        d.set_item("lambda", rep.lambda)?;
        d.set_item("delta_tilde", rep.delta_tilde)?;
        d.set_item("admissible", rep.admissible)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("MixingParams(p={}, q={})", self.0.p(), self.0.q())
    }
}

/// Uniform symmetric frequency grid on `[-xi_max, xi_max]`.
#[pyclass(name = "FrequencyGrid", frozen, from_py_object)]
#[derive(Clone, Copy)]
pub struct PyFrequencyGrid(maxwell1d::FrequencyGrid);

#[pymethods]
impl PyFrequencyGrid {
    #[new]
    fn new(xi_max: f64, n_points: usize) -> PyResult<Self> {
        maxwell1d::FrequencyGrid::new(xi_max, n_points).map(Self).map_err(to_py)
    }

    #[getter]
    fn xi_max(&self) -> f64 {
        self.0.xi_max()
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.0.spacing()
    }

    fn nodes(&self) -> Vec<f64> {
        self.0.nodes().collect()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!("FrequencyGrid(xi_max={}, n_points={})", self.0.xi_max(), self.0.len())
    }
}

/// A characteristic function sampled on a grid.
#[pyclass(name = "SpectralState", frozen, from_py_object)]
#[derive(Clone)]
pub struct PySpectralState(maxwell1d::SpectralState);

#[pymethods]
impl PySpectralState {
    #[staticmethod]
    #[pyo3(signature = (grid, params, kind = "scaled"))]
    fn gaussian(grid: PyFrequencyGrid, params: PyMixingParams, kind: &str) -> PyResult<Self> {
        Ok(Self(maxwell1d::SpectralState::gaussian(grid.0, params.0, parse_kind(kind)?)))
    }

    #[staticmethod]
    #[pyo3(signature = (grid, params, kind = "scaled"))]
    fn two_point(grid: PyFrequencyGrid, params: PyMixingParams, kind: &str) -> PyResult<Self> {
        Ok(Self(maxwell1d::SpectralState::two_point(grid.0, params.0, parse_kind(kind)?)))
    }

    /// `(1 + |xi|) e^{-|xi|}`, stationary when `p + q = 1`.
    #[staticmethod]
    #[pyo3(signature = (grid, params, kind = "scaled"))]
    fn explicit_steady(grid: PyFrequencyGrid, params: PyMixingParams, kind: &str) -> PyResult<Self> {
        Ok(Self(maxwell1d::SpectralState::explicit_steady(grid.0, params.0, parse_kind(kind)?)))
    }

    /// Builds a state from node values given as real and imaginary parts.
    #[staticmethod]
    #[pyo3(signature = (grid, params, real, imag = None, time = 0.0, kind = "scaled"))]
    fn from_values(
        grid: PyFrequencyGrid,
        params: PyMixingParams,
        real: Vec<f64>,
        imag: Option<Vec<f64>>,
        time: f64,
        kind: &str,
    ) -> PyResult<Self> {
        let imag = imag.unwrap_or_else(|| vec![0.0; real.len()]);
        if imag.len() != real.len() {
            return Err(PyValueError::new_err("real and imag differ in length"));
        }
        let values = real.iter().zip(&imag).map(|(&re, &im)| Complex64::new(re, im)).collect();
        maxwell1d::SpectralState::new(grid.0, values, params.0, time, parse_kind(kind)?)
            .map(Self)
            .map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        maxwell1d::SpectralState::load(path).map(Self).map_err(to_py)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.0.save(path).map_err(to_py)
    }

    #[getter]
    fn grid(&self) -> PyFrequencyGrid {
        PyFrequencyGrid(*self.0.grid())
    }

    #[getter]
    fn params(&self) -> PyMixingParams {
        PyMixingParams(*self.0.params())
    }

    #[getter]
    fn time(&self) -> f64 {
        self.0.time()
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.0.kind().as_str()
    }

    fn real(&self) -> Vec<f64> {
        self.0.values().iter().map(|v| v.re).collect()
    }

    fn imag(&self) -> Vec<f64> {
        self.0.values().iter().map(|v| v.im).collect()
    }

    /// Interpolated value; zero outside the grid.
    fn eval(&self, xi: f64) -> Complex64 {
        self.0.eval(xi)
    }

    fn second_moment(&self) -> f64 {
        self.0.second_moment()
    }

    /// `{"mass_err", "mean_err", "var_err", "pass"}`.
    #[pyo3(signature = (tol = 1e-3))]
    fn check_normalization<'py>(&self, py: Python<'py>, tol: f64) -> PyResult<Bound<'py, PyDict>> {
        let rep = self.0.check_normalization(tol);
        let d = PyDict::new(py);
        d.set_item("mass_err", rep.mass_err)?;
        d.set_item("mean_err", rep.mean_err)?;
        d.set_item("var_err", rep.var_err)?;
        d.set_item("pass", rep.pass)?;
        Ok(d)
    }

    fn __len__(&self) -> usize {
        self.0.grid().len()
    }

    fn __repr__(&self) -> String {
        format!(
            "SpectralState(kind={}, t={}, n_points={}, p={}, q={})",
            self.0.kind(),
            self.0.time(),
            self.0.grid().len(),
            self.0.params().p(),
            self.0.params().q()
        )
    }
}

/// Snapshots of one solver run.
#[pyclass(name = "Trajectory", frozen)]
pub struct PyTrajectory(solver::Trajectory);

#[pymethods]
impl PyTrajectory {
    #[staticmethod]
    fn load(dir: PathBuf) -> PyResult<Self> {
        solver::Trajectory::load(dir).map(Self).map_err(to_py)
    }

    fn save(&self, dir: PathBuf) -> PyResult<()> {
        self.0.save(dir).map_err(to_py)
    }

    fn times(&self) -> Vec<f64> {
        self.0.times()
    }

    fn snapshots(&self) -> Vec<PySpectralState> {
        self.0.snapshots().iter().cloned().map(PySpectralState).collect()
    }

    fn last(&self) -> PySpectralState {
        PySpectralState(self.0.last().clone())
    }

    /// Value at an arbitrary time in the window, interpolated between snapshots.
    fn eval(&self, xi: f64, t: f64) -> PyResult<Complex64> {
        solver::trajectory_eval(&self.0, xi, t).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.0.snapshots().len()
    }
}

/// Integrates from `initial` to `t_end`.
#[pyfunction]
#[pyo3(signature = (initial, params, dt, t_end, scheme = "scaled", quad_nodes = 16, snapshot_every = 1, tail_tol = 1e-6))]
#[allow(clippy::too_many_arguments)]
fn evolve(
    py: Python<'_>,
    initial: &PySpectralState,
    params: PyMixingParams,
    dt: f64,
    t_end: f64,
    scheme: &str,
    quad_nodes: usize,
    snapshot_every: usize,
    tail_tol: f64,
) -> PyResult<PyTrajectory> {
    let config = solver::SolverConfig { dt, t_end, quad_nodes, snapshot_every, tail_tol };
    let scheme = parse_scheme(scheme)?;
    let initial = initial.0.clone();
    py.detach(|| solver::evolve(&initial, &params.0, &config, scheme))
        .map(PyTrajectory)
        .map_err(to_py)
}

/// Stationary profile by fixed-point iteration; returns the state and the
/// per-sweep `d_{2+delta}` changes.
#[pyfunction]
#[pyo3(signature = (params, grid, delta = 0.5, tol = 1e-8, max_iter = 1000))]
fn fixed_point_steady(
    py: Python<'_>,
    params: PyMixingParams,
    grid: PyFrequencyGrid,
    delta: f64,
    tol: f64,
    max_iter: usize,
) -> PyResult<(PySpectralState, Vec<f64>)> {
    let (state, log) = py
        .detach(|| steady::fixed_point_steady(&params.0, &grid.0, delta, tol, max_iter))
        .map_err(to_py)?;
    Ok((PySpectralState(state), log.iter().map(|l| l.d_distance).collect()))
}

/// Stationarity residual `sup |psi - Q(psi)|` over interior nodes.
#[pyfunction]
fn steady_residual(state: &PySpectralState, params: PyMixingParams) -> PyResult<f64> {
    steady::residual(&state.0, &params.0).map_err(to_py)
}

/// `(mu, lambda)` of `|g| ~ e^{-mu |xi|^lambda}` fitted beyond `rho`.
#[pyfunction]
fn gevrey_fit(state: &PySpectralState, rho: f64) -> PyResult<(f64, f64)> {
    steady::gevrey_fit(&state.0, rho).map(|f| (f.mu, f.lambda_fit)).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (a, b, alpha = 2.5, xi_min = None))]
fn fourier_distance(a: &PySpectralState, b: &PySpectralState, alpha: f64, xi_min: Option<f64>) -> PyResult<f64> {
    let xi_min = xi_min.unwrap_or_else(|| metrics::default_xi_min(a.0.grid()));
    metrics::fourier_distance(&a.0, &b.0, alpha, xi_min).map_err(to_py)
}

#[pyfunction]
fn sup_distance(a: &PySpectralState, b: &PySpectralState) -> PyResult<f64> {
    metrics::sup_distance(&a.0, &b.0).map_err(to_py)
}

/// `(rate, predicted_rate, bound_ok)` of the exponential decay of `d_alpha`
/// towards `reference` over `window`.
#[pyfunction]
#[pyo3(signature = (traj, reference, alpha, window))]
fn decay_rate_fit(
    traj: &PyTrajectory,
    reference: &PySpectralState,
    alpha: f64,
    window: (f64, f64),
) -> PyResult<(f64, f64, bool)> {
    metrics::decay_rate_fit(&traj.0, &reference.0, alpha, window)
        .map(|f| (f.rate, f.predicted_rate, f.bound_ok))
        .map_err(to_py)
}

/// Second moment `E(t)` of the unscaled solution started at unit energy.
#[pyfunction]
fn energy_at(params: PyMixingParams, t: f64) -> f64 {
    moments::energy_at(&params.0, t)
}

/// Moments `m_0..m_{n_max}` read off a state.
#[pyfunction]
fn spectral_moments(state: &PySpectralState, n_max: usize) -> PyResult<Vec<f64>> {
    moments::spectral_moments(&state.0, n_max).map(|m| m.values().to_vec()).map_err(to_py)
}

/// Gaussian moments evolved by the closed moment hierarchy.
#[pyfunction]
#[pyo3(signature = (params, n_max, t_end, dt = 1e-3))]
fn hierarchy_moments(params: PyMixingParams, n_max: usize, t_end: f64, dt: f64) -> PyResult<Vec<f64>> {
    let m0 = moments::MomentVector::gaussian(n_max).map_err(to_py)?;
    moments::integrate_hierarchy(&m0, &params.0, t_end, dt)
        .map(|m| m.values().to_vec())
        .map_err(to_py)
}

/// `(v, f)`: the velocity density on `[-v_max, v_max]`.
#[pyfunction]
#[pyo3(signature = (state, v_max = 20.0, n_points = 4097))]
fn inverse_transform(state: &PySpectralState, v_max: f64, n_points: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let f = physical::inverse_transform(&state.0, v_max, n_points).map_err(to_py)?;
    Ok((f.nodes().collect(), f.values().to_vec()))
}

/// `H(f) = -int sqrt(f)` of the density behind `state`.
#[pyfunction]
#[pyo3(signature = (state, v_max = lyapunov::DEFAULT_V_MAX, n_points = lyapunov::DEFAULT_V_POINTS))]
fn h_functional(state: &PySpectralState, v_max: f64, n_points: usize) -> PyResult<f64> {
    let f = physical::inverse_transform(&state.0, v_max, n_points).map_err(to_py)?;
    lyapunov::h_functional(&f).map_err(to_py)
}

/// `(lhs, rhs, gap, saturated)` of the square-root inequality on `p + q = 1`.
#[pyfunction]
#[pyo3(signature = (state, params, v_max = lyapunov::DEFAULT_V_MAX, n_points = lyapunov::DEFAULT_V_POINTS))]
fn main_inequality(
    py: Python<'_>,
    state: &PySpectralState,
    params: PyMixingParams,
    v_max: f64,
    n_points: usize,
) -> PyResult<(f64, f64, f64, bool)> {
    let state = state.0.clone();
    py.detach(|| lyapunov::main_inequality(&state, &params.0, v_max, n_points))
        .map(|r| (r.lhs, r.rhs, r.gap, r.saturated))
        .map_err(to_py)
}

#[pymodule]
fn maxwell1d_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_class::<PyMixingParams>()?;
    m.add_class::<PyFrequencyGrid>()?;
    m.add_class::<PySpectralState>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(fixed_point_steady, m)?)?;
    m.add_function(wrap_pyfunction!(steady_residual, m)?)?;
    m.add_function(wrap_pyfunction!(gevrey_fit, m)?)?;
    m.add_function(wrap_pyfunction!(fourier_distance, m)?)?;
    m.add_function(wrap_pyfunction!(sup_distance, m)?)?;
    m.add_function(wrap_pyfunction!(decay_rate_fit, m)?)?;
    m.add_function(wrap_pyfunction!(energy_at, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_moments, m)?)?;
    m.add_function(wrap_pyfunction!(hierarchy_moments, m)?)?;
    m.add_function(wrap_pyfunction!(inverse_transform, m)?)?;
    m.add_function(wrap_pyfunction!(h_functional, m)?)?;
    m.add_function(wrap_pyfunction!(main_inequality, m)?)?;
    Ok(())
}
