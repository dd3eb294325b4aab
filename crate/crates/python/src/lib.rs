//! Python bindings: streaming state, boundaries, confidence sequences,
//! spectrum estimation and the experiment runner.

use std::path::Path;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ustat_cs::boundaries::{self, Boundary, BoundaryKind, BoundaryParams, DEFAULT_ETA, DEFAULT_S};
use ustat_cs::kernels::{KernelId, Point};
use ustat_cs::sequences::{self, Method};
use ustat_cs::simharness::{self, output::write_result, ExperimentConfig};
use ustat_cs::spectral::{self, EigenMethod, SpectrumConfig, WeightScheme, DEFAULT_TRUNC_EXPONENT};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr<Err = String>>(s: &str) -> PyResult<T> {
    s.parse().map_err(PyValueError::new_err)
}

fn params(kind: &str, alpha: f64, m: u64, eta: f64, s: f64) -> PyResult<BoundaryParams> {
    BoundaryParams::with_stitching(parse::<BoundaryKind>(kind)?, alpha, m, eta, s).map_err(err)
}

#[derive(FromPyObject)]
enum PyPoint {
    One(f64),
    Two((f64, f64)),
}

fn to_point(kernel: KernelId, p: PyPoint) -> PyResult<Point> {
    match (kernel, p) {
        (KernelId::Variance | KernelId::Gmd, PyPoint::One(x)) => Ok(Point::Scalar(x)),
        (KernelId::SpatialKendall, PyPoint::Two((a, b))) => Ok(Point::Vec2(a, b)),
        (KernelId::MmdGauss, PyPoint::Two((x, y))) => Ok(Point::Pair(x, y)),
        (k, _) => Err(PyValueError::new_err(format!("kernel {k} expects a {} point", k.expected_variant()))),
    }
}

/// Streaming U-statistic with row sums and the jackknife variance.
#[pyclass(name = "UStatState", module = "ustat_cs_py")]
pub struct PyUStatState {
    inner: ustat_cs::UStatState,
}

#[pymethods]
impl PyUStatState {
    #[new]
    #[pyo3(signature = (kernel, gram_cache = false))]
    fn new(kernel: &str, gram_cache: bool) -> PyResult<Self> {
        let k = parse::<KernelId>(kernel)?;
        let inner = if gram_cache {
            ustat_cs::UStatState::with_gram_cache(k)
        } else {
            ustat_cs::UStatState::new(k)
        };
        Ok(PyUStatState { inner })
    }

    /// Adds one observation: a float, or a 2-tuple for the bivariate kernels.
    fn push(&mut self, point: PyPoint) -> PyResult<()> {
        let p = to_point(self.inner.kernel(), point)?;
        self.inner.push(p).map_err(err)
    }

    fn extend(&mut self, points: Vec<PyPoint>) -> PyResult<()> {
        for p in points {
            self.push(p)?;
        }
        Ok(())
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn kernel(&self) -> &'static str {
        self.inner.kernel().as_str()
    }

    #[getter]
    fn pair_sum(&self) -> f64 {
        self.inner.pair_sum()
    }

    #[getter]
    fn diag_sum(&self) -> f64 {
        self.inner.diag_sum()
    }

    fn row_sums(&self) -> Vec<f64> {
        self.inner.row_sums()
    }

    fn ustat(&self) -> PyResult<f64> {
        self.inner.ustat().map_err(err)
    }

    fn jackknife_sigma2(&self) -> PyResult<f64> {
        self.inner.jackknife_sigma2().map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!("UStatState(kernel='{}', n={})", self.inner.kernel(), self.inner.n())
    }
}

/// One interval (or one-sided bound) at time `n`.
#[pyclass(name = "CsRecord", module = "ustat_cs_py", frozen, get_all, from_py_object)]
#[derive(Clone)]
pub struct PyCsRecord {
    n: u64,
    method: String,
    center: f64,
    lo: f64,
    hi: f64,
    sigma_hat: Option<f64>,
    boundary_value: f64,
}

impl From<sequences::CsRecord> for PyCsRecord {
    fn from(r: sequences::CsRecord) -> Self {
        PyCsRecord {
            n: r.n,
            method: r.method.to_string(),
            center: r.center,
            lo: r.lo,
            hi: r.hi,
            sigma_hat: r.sigma_hat,
            boundary_value: r.boundary_value,
        }
    }
}

impl PyCsRecord {
    fn to_core(&self) -> PyResult<sequences::CsRecord> {
        Ok(sequences::CsRecord {
            n: self.n,
            method: parse::<Method>(&self.method)?,
            center: self.center,
            lo: self.lo,
            hi: self.hi,
            sigma_hat: self.sigma_hat,
            boundary_value: self.boundary_value,
        })
    }
}

#[pymethods]
impl PyCsRecord {
    fn contains(&self, theta: f64) -> bool {
        self.lo <= theta && theta <= self.hi
    }

    fn half_width(&self) -> PyResult<f64> {
        Ok(self.to_core()?.half_width())
    }

    fn to_csv_row(&self) -> PyResult<String> {
        Ok(self.to_core()?.to_csv_row())
    }

    fn __repr__(&self) -> String {
        format!("CsRecord(n={}, method='{}', lo={}, hi={})", self.n, self.method, self.lo, self.hi)
    }
}

/// Truncated spectrum estimate and its SAGE aggregates.
#[pyclass(name = "SpectrumEstimate", module = "ustat_cs_py", frozen)]
pub struct PySpectrum {
    inner: spectral::SpectrumEstimate,
}

#[pymethods]
impl PySpectrum {
    /// Builds an estimate from given eigenvalues and trace.
    #[staticmethod]
    #[pyo3(signature = (eigenvalues, lambda_total, weights = "data", alpha = 0.05))]
    fn from_eigenvalues(eigenvalues: Vec<f64>, lambda_total: f64, weights: &str, alpha: f64) -> PyResult<Self> {
        let scheme = parse::<WeightScheme>(weights)?;
        let inner = spectral::SpectrumEstimate::from_eigenvalues(eigenvalues, lambda_total, scheme, alpha).map_err(err)?;
        Ok(PySpectrum { inner })
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues.clone()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights.clone()
    }

    #[getter]
    fn lambda_total(&self) -> f64 {
        self.inner.lambda_total
    }

    /// `(total, log_weighted, g_weighted)` over positive eigenvalues.
    #[getter]
    fn plus(&self) -> (f64, f64, f64) {
        let p = self.inner.plus;
        (p.total, p.log_weighted, p.g_weighted)
    }

    #[getter]
    fn minus(&self) -> (f64, f64, f64) {
        let p = self.inner.minus;
        (p.total, p.log_weighted, p.g_weighted)
    }

    #[getter]
    fn scheme(&self) -> String {
        self.inner.scheme.to_string()
    }

    #[getter]
    fn fallback_weights(&self) -> bool {
        self.inner.fallback_weights
    }

    #[getter]
    fn n_used(&self) -> usize {
        self.inner.n_used
    }

    fn __repr__(&self) -> String {
        format!(
            "SpectrumEstimate(L={}, scheme='{}', lambda_total={})",
            self.inner.truncation(),
            self.inner.scheme,
            self.inner.lambda_total
        )
    }
}

/// Gaussian boundary `gamma(n)` of kind `lil` or `gm`.
#[pyfunction]
#[pyo3(signature = (n, kind, alpha, m, eta = DEFAULT_ETA, s = DEFAULT_S))]
fn gamma(n: u64, kind: &str, alpha: f64, m: u64, eta: f64, s: f64) -> PyResult<f64> {
    boundaries::gamma(n, &params(kind, alpha, m, eta, s)?).map_err(err)
}

#[pyfunction]
fn g_inv(p: f64) -> PyResult<f64> {
    boundaries::g_inv(p).map_err(err)
}

/// Two-sided AsympCS record, or `None` before the cold start ends.
#[pyfunction]
#[pyo3(signature = (state, kind, alpha, m, eta = DEFAULT_ETA, s = DEFAULT_S))]
fn nondegenerate_cs(
    state: &PyUStatState,
    kind: &str,
    alpha: f64,
    m: u64,
    eta: f64,
    s: f64,
) -> PyResult<Option<PyCsRecord>> {
    let b = Boundary::new(params(kind, alpha, m, eta, s)?).map_err(err)?;
    Ok(sequences::nondegenerate_cs_with(&state.inner, &b).map_err(err)?.map(Into::into))
}

/// One-sided SAGE record `[U_n - Upsilon(n), inf)`, or `None` during the cold start.
#[pyfunction]
#[pyo3(signature = (state, spectrum, kind, alpha, m, eta = DEFAULT_ETA, s = DEFAULT_S))]
fn degenerate_cs(
    state: &PyUStatState,
    spectrum: &PySpectrum,
    kind: &str,
    alpha: f64,
    m: u64,
    eta: f64,
    s: f64,
) -> PyResult<Option<PyCsRecord>> {
    let p = params(kind, alpha, m, eta, s)?;
    Ok(sequences::degenerate_cs(&state.inner, &p, &spectrum.inner)
        .map_err(err)?
        .map(Into::into))
}

#[pyfunction]
fn classical_ci(state: &PyUStatState, alpha: f64) -> PyResult<PyCsRecord> {
    Ok(sequences::classical_ci(&state.inner, alpha).map_err(err)?.into())
}

#[pyfunction]
#[pyo3(signature = (state, weights = "data", alpha = 0.05, trunc_a = DEFAULT_TRUNC_EXPONENT, subsample_w = None))]
fn estimate_spectrum(
    state: &PyUStatState,
    weights: &str,
    alpha: f64,
    trunc_a: f64,
    subsample_w: Option<f64>,
) -> PyResult<PySpectrum> {
    let cfg = SpectrumConfig {
        scheme: parse::<WeightScheme>(weights)?,
        alpha,
        trunc_exponent: trunc_a,
        subsample_exponent: subsample_w,
        method: EigenMethod::Auto,
    };
    let inner = spectral::estimate_spectrum(&state.inner, &cfg).map_err(err)?;
    Ok(PySpectrum { inner })
}

/// SAGE upper boundary `Upsilon(n)`.
#[pyfunction]
#[pyo3(signature = (n, spectrum, kind, alpha, m, eta = DEFAULT_ETA, s = DEFAULT_S))]
fn sage_upper(n: u64, spectrum: &PySpectrum, kind: &str, alpha: f64, m: u64, eta: f64, s: f64) -> PyResult<f64> {
    spectral::sage_upper(n, &spectrum.inner, &params(kind, alpha, m, eta, s)?).map_err(err)
}

/// `(reject, first_rejection_n)` for `theta0` over a run of records.
#[pyfunction]
fn sequential_test(records: Vec<PyCsRecord>, theta0: f64) -> PyResult<(bool, Option<u64>)> {
    let core = records.iter().map(PyCsRecord::to_core).collect::<PyResult<Vec<_>>>()?;
    let d = sequences::sequential_test(&core, theta0);
    Ok((d.reject, d.first_rejection_n))
}

/// Runs an experiment from its JSON config and returns the result as JSON.
/// With `out_dir`, also writes the CSV and SVG files there.
#[pyfunction]
#[pyo3(signature = (config_json, out_dir = None))]
fn run_experiment(py: Python<'_>, config_json: &str, out_dir: Option<&str>) -> PyResult<String> {
    let config = ExperimentConfig::from_json(config_json).map_err(err)?;
    let result = py.detach(|| simharness::run(&config)).map_err(err)?;
    if let Some(dir) = out_dir {
        write_result(&result, Path::new(dir)).map_err(err)?;
    }
    serde_json::to_string(&result).map_err(err)
}

#[pymodule]
pub fn ustat_cs_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyUStatState>()?;
    m.add_class::<PyCsRecord>()?;
    m.add_class::<PySpectrum>()?;
    m.add_function(wrap_pyfunction!(gamma, m)?)?;
    m.add_function(wrap_pyfunction!(g_inv, m)?)?;
    m.add_function(wrap_pyfunction!(nondegenerate_cs, m)?)?;
    m.add_function(wrap_pyfunction!(degenerate_cs, m)?)?;
    m.add_function(wrap_pyfunction!(classical_ci, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(sage_upper, m)?)?;
    m.add_function(wrap_pyfunction!(sequential_test, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
