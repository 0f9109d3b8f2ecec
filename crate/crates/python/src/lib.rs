//! Python bindings for `rough_ldp`.
//!
//! Structured arguments (kernel specs, starting laws, schemes, problems) are
//! passed as dicts or JSON strings in the same shape the CLI configs use.
//! Results converted through JSON report non-finite numbers as `None`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyString};
use serde::de::DeserializeOwned;
use serde::Serialize;

use rough_ldp::kernels::{self, KernelSpec};
use rough_ldp::model::{self, InitialLaw, LdpOptions, ModelParams, RescalingScheme, VolFunction};
use rough_ldp::paths::{self, PathConstruction};
use rough_ldp::rates::{self, RateOptions, SolverOptions, VariationalProblem};
use rough_ldp::smile;
use rough_ldp::{Error, Hurst, TimeGrid};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Quadrature { .. }
        | Error::Factorization { .. }
        | Error::Convergence(_)
        | Error::Io(_)
        | Error::Csv(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn json_text(obj: &Bound<'_, PyAny>) -> PyResult<String> {
    if let Ok(s) = obj.cast::<PyString>() {
        return Ok(s.to_string());
    }
    obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    serde_json::from_str(&json_text(obj)?).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn hurst(h: f64) -> PyResult<Hurst> {
    Hurst::new(h).map_err(py_err)
}

/// Parameters of the randomised fractional Stein-Stein model with a linear
/// volatility function.
#[pyclass(name = "ModelParams", from_py_object)]
#[derive(Clone)]
struct PyModelParams(ModelParams);

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (hurst, beta = -1.0, xi = 1.0, rho = 0.0, lambda_ = 0.0, b = 1.0))]
    fn new(hurst: f64, beta: f64, xi: f64, rho: f64, lambda_: f64, b: f64) -> PyResult<Self> {
        let p = ModelParams { lambda: lambda_, beta, xi, rho, hurst: self::hurst(hurst)?, vol: VolFunction::linear(b) };
        p.validate().map_err(py_err)?;
        Ok(Self(p))
    }

    /// Builds parameters from the dict or JSON form, which allows any
    /// volatility function.
    #[staticmethod]
    fn from_dict(obj: &Bound<'_, PyAny>) -> PyResult<Self> {
        let p: ModelParams = from_py(obj)?;
        p.validate().map_err(py_err)?;
        Ok(Self(p))
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0)
    }

    #[getter]
    fn hurst(&self) -> f64 {
        self.0.hurst.value()
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.0.beta
    }

    #[getter]
    fn xi(&self) -> f64 {
        self.0.xi
    }

    #[getter]
    fn rho(&self) -> f64 {
        self.0.rho
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

#[pyclass(name = "TimeGrid", from_py_object)]
#[derive(Clone)]
struct PyTimeGrid(TimeGrid);

#[pymethods]
impl PyTimeGrid {
    #[new]
    #[pyo3(signature = (n, horizon = 1.0))]
    fn new(n: usize, horizon: f64) -> PyResult<Self> {
        TimeGrid::uniform_horizon(n, horizon).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn from_nodes(nodes: Vec<f64>) -> PyResult<Self> {
        TimeGrid::from_nodes(nodes).map(Self).map_err(py_err)
    }

    #[getter]
    fn nodes(&self) -> Vec<f64> {
        self.0.nodes().to_vec()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }
}

#[pyclass(name = "RateResult")]
struct PyRateResult(rates::RateResult);

#[pymethods]
impl PyRateResult {
    #[getter]
    fn value(&self) -> f64 {
        self.0.value
    }

    #[getter]
    fn converged(&self) -> bool {
        self.0.converged
    }

    #[getter]
    fn kkt_residual(&self) -> f64 {
        self.0.kkt_residual
    }

    #[getter]
    fn start_used(&self) -> f64 {
        self.0.start_used
    }

    #[getter]
    fn y_path(&self) -> Vec<f64> {
        self.0.y_path.clone()
    }

    #[getter]
    fn x_path(&self) -> Vec<f64> {
        self.0.x_path.clone()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.0.warnings.clone()
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0)
    }

    fn __repr__(&self) -> String {
        format!("RateResult(value={}, converged={})", self.0.value, self.0.converged)
    }
}

#[pyclass(name = "SmileResult")]
struct PySmileResult(smile::SmileResult);

#[pymethods]
impl PySmileResult {
    #[getter]
    fn limit_value(&self) -> f64 {
        self.0.limit_value
    }

    #[getter]
    fn rate(&self) -> f64 {
        self.0.rate_used.value
    }

    #[getter]
    fn formula(&self) -> String {
        self.0.formula.clone()
    }

    #[getter]
    fn explosion_exponent(&self) -> Option<f64> {
        self.0.explosion_exponent
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.0.warnings.clone()
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.0)
    }

    fn __repr__(&self) -> String {
        format!("SmileResult(limit_value={}, formula={:?})", self.0.limit_value, self.0.formula)
    }
}

fn rate_options(grid_nodes: usize) -> RateOptions {
    RateOptions { grid_nodes, ..RateOptions::default() }
}

/// Kernel value `Φ(t, s)` for `0 < s < t`.
#[pyfunction]
fn eval_kernel(spec: &Bound<'_, PyAny>, t: f64, s: f64) -> PyResult<f64> {
    let spec: KernelSpec = from_py(spec)?;
    kernels::eval_kernel(&spec, t, s).map_err(py_err)
}

/// Gram matrix of a kernel on a grid, as a list of rows.
#[pyfunction]
fn gram_matrix(spec: &Bound<'_, PyAny>, grid: &PyTimeGrid) -> PyResult<Vec<Vec<f64>>> {
    let spec: KernelSpec = from_py(spec)?;
    let g = kernels::gram_matrix(&spec, &grid.0).map_err(py_err)?;
    Ok((0..g.dim()).map(|i| g.row(i).to_vec()).collect())
}

#[pyfunction]
fn fbm_covariance(h: f64, t: f64, s: f64) -> PyResult<f64> {
    Ok(paths::fbm_covariance(hurst(h)?, t, s))
}

/// Exact fOU paths on `grid`, one list per path.
#[pyfunction]
#[pyo3(signature = (h, beta, xi, grid, n_paths, seed, construction = "kernel_driven"))]
#[allow(clippy::too_many_arguments)]
fn sample_fou(
    py: Python<'_>,
    h: f64,
    beta: f64,
    xi: f64,
    grid: &PyTimeGrid,
    n_paths: usize,
    seed: u64,
    construction: &str,
) -> PyResult<Vec<Vec<f64>>> {
    let construction: PathConstruction = serde_json::from_value(serde_json::Value::String(construction.into()))
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let h = hurst(h)?;
    let grid = grid.0.clone();
    let batch = py.detach(|| paths::sample_fou(h, beta, xi, &grid, n_paths, seed, construction)).map_err(py_err)?;
    Ok((0..n_paths).map(|i| batch.path(i).to_vec()).collect())
}

/// Minimizes a variational problem given in dict or JSON form.
#[pyfunction]
#[pyo3(signature = (problem, solver = None))]
fn solve(py: Python<'_>, problem: &Bound<'_, PyAny>, solver: Option<&Bound<'_, PyAny>>) -> PyResult<PyRateResult> {
    let problem: VariationalProblem = from_py(problem)?;
    let solver: SolverOptions = solver.map(from_py).transpose()?.unwrap_or_default();
    py.detach(|| rates::solve(&problem, &solver)).map(PyRateResult).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (params, level, b, grid_nodes = 48))]
fn tail_rate(py: Python<'_>, params: &PyModelParams, level: f64, b: f64, grid_nodes: usize) -> PyResult<PyRateResult> {
    let p = params.0.clone();
    py.detach(|| rates::tail_rate(&p, level, b, &rate_options(grid_nodes))).map(PyRateResult).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (params, k, b, grid_nodes = 48))]
fn smalltime_rate(py: Python<'_>, params: &PyModelParams, k: f64, b: f64, grid_nodes: usize) -> PyResult<PyRateResult> {
    let p = params.0.clone();
    py.detach(|| rates::smalltime_rate(&p, k, b, &rate_options(grid_nodes))).map(PyRateResult).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (params, b, t = 1.0, grid_nodes = 48))]
fn tail_smile_slope(
    py: Python<'_>,
    params: &PyModelParams,
    b: f64,
    t: f64,
    grid_nodes: usize,
) -> PyResult<PySmileResult> {
    let p = params.0.clone();
    py.detach(|| smile::tail_smile_slope(&p, b, t, &rate_options(grid_nodes))).map(PySmileResult).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (params, k, b, grid_nodes = 48))]
fn smalltime_smile(
    py: Python<'_>,
    params: &PyModelParams,
    k: f64,
    b: f64,
    grid_nodes: usize,
) -> PyResult<PySmileResult> {
    let p = params.0.clone();
    py.detach(|| smile::smalltime_smile(&p, k, b, &rate_options(grid_nodes))).map(PySmileResult).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (params, sigma0, t, k, radius = 4.0, grid_nodes = 48))]
fn forward_smile(
    py: Python<'_>,
    params: &PyModelParams,
    sigma0: f64,
    t: f64,
    k: f64,
    radius: f64,
    grid_nodes: usize,
) -> PyResult<PySmileResult> {
    let p = params.0.clone();
    py.detach(|| smile::forward_smile(&p, sigma0, t, k, radius, &rate_options(grid_nodes)))
        .map(PySmileResult)
        .map_err(py_err)
}

#[pyfunction]
fn bs_price(forward: f64, strike: f64, maturity: f64, vol: f64) -> f64 {
    smile::bs_price(forward, strike, maturity, vol)
}

#[pyfunction]
fn bs_implied_vol(price: f64, forward: f64, strike: f64, maturity: f64) -> PyResult<f64> {
    smile::bs_implied_vol(price, forward, strike, maturity).map_err(py_err)
}

/// Monte Carlo tail probabilities along an `ε` ladder and their affine
/// extrapolation, returned as a dict.
#[pyfunction]
#[pyo3(signature = (params, law, scheme, eps_ladder, level, n_paths, seed))]
#[allow(clippy::too_many_arguments)]
fn ldp_slope<'py>(
    py: Python<'py>,
    params: &PyModelParams,
    law: &Bound<'py, PyAny>,
    scheme: &Bound<'py, PyAny>,
    eps_ladder: Vec<f64>,
    level: f64,
    n_paths: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let law: InitialLaw = from_py(law)?;
    let scheme: RescalingScheme = from_py(scheme)?;
    let p = params.0.clone();
    let fit = py
        .detach(|| model::ldp_slope(&p, &law, scheme, &eps_ladder, level, n_paths, seed, &LdpOptions::default()))
        .map_err(py_err)?;
    to_py(py, &fit)
}

#[pyfunction]
fn check_theta_assumption<'py>(
    py: Python<'py>,
    law: &Bound<'py, PyAny>,
    scheme: &Bound<'py, PyAny>,
    h: f64,
    eps_ladder: Vec<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let law: InitialLaw = from_py(law)?;
    let scheme: RescalingScheme = from_py(scheme)?;
    let report = model::check_theta_assumption(&law, scheme, hurst(h)?, &eps_ladder).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("values", report.values)?;
    out.set_item("verdict", to_py(py, &report.verdict)?)?;
    out.set_item("limit", report.limit)?;
    Ok(out.into_any())
}

#[pymodule]
fn rough_ldp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add_class::<PyTimeGrid>()?;
    m.add_class::<PyRateResult>()?;
    m.add_class::<PySmileResult>()?;
    m.add_function(wrap_pyfunction!(eval_kernel, m)?)?;
    m.add_function(wrap_pyfunction!(gram_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(fbm_covariance, m)?)?;
    m.add_function(wrap_pyfunction!(sample_fou, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(tail_rate, m)?)?;
    m.add_function(wrap_pyfunction!(smalltime_rate, m)?)?;
    m.add_function(wrap_pyfunction!(tail_smile_slope, m)?)?;
    m.add_function(wrap_pyfunction!(smalltime_smile, m)?)?;
    m.add_function(wrap_pyfunction!(forward_smile, m)?)?;
    m.add_function(wrap_pyfunction!(bs_price, m)?)?;
    m.add_function(wrap_pyfunction!(bs_implied_vol, m)?)?;
    m.add_function(wrap_pyfunction!(ldp_slope, m)?)?;
    m.add_function(wrap_pyfunction!(check_theta_assumption, m)?)?;
    Ok(())
}
