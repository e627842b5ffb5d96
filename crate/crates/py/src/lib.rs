//! Python bindings for `mipt-core`.
//!
//! States are passed as flat lists of complex amplitudes of length `2^L`,
//! with bit `j` of the index holding site `j` (0 = up).

#![allow(clippy::useless_conversion)]

use mipt_core::analysis::{self, PlateauConfig};
use mipt_core::entanglement::{self, BipartitionSpec, SplitSet};
use mipt_core::freefermion::{self, FreeFermionOptions, OverlapSeries};
use mipt_core::propagator;
use mipt_core::protocol::{self, ProtocolOptions};
use mipt_core::summation::PrecisionMode;
use mipt_core::sweep::{self, Engine, EngineOptions, TauGrid};
use mipt_core::validate::{run_validation, ValidationConfig};
use mipt_core::{Error, PureState};
use num_complex::Complex64;
use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: Error) -> PyErr {
    if e.is_numeric() {
        PyArithmeticError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn precision(s: &str) -> PyResult<PrecisionMode> {
    s.parse().map_err(PyValueError::new_err)
}

fn engine(s: &str) -> PyResult<Engine> {
    s.parse().map_err(|e: Error| PyValueError::new_err(e.to_string()))
}

fn splits(s: &str) -> PyResult<SplitSet> {
    match s {
        "prefixes" => Ok(SplitSet::ContiguousPrefixes),
        "all" => Ok(SplitSet::AllBipartitions),
        other => Err(PyValueError::new_err(format!(
            "unknown split set '{other}' (expected prefixes or all)"
        ))),
    }
}

fn state(amps: Vec<Complex64>) -> PyResult<PureState> {
    PureState::from_vec(amps).map_err(err)
}

/// Chain length, transverse field and measurement period.
#[pyclass(frozen, module = "mipt")]
#[derive(Clone, Copy)]
struct ModelParams(mipt_core::ModelParams);

#[pymethods]
impl ModelParams {
    #[new]
    fn new(l: usize, h: f64, tau: f64) -> PyResult<Self> {
        mipt_core::ModelParams::new(l, h, tau).map(Self).map_err(err)
    }

    #[getter]
    fn l(&self) -> usize {
        self.0.l()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.0.h()
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.0.tau()
    }

    /// `tau * sqrt(L)`.
    #[getter]
    fn sigma(&self) -> f64 {
        self.0.sigma()
    }

    fn with_tau(&self, tau: f64) -> PyResult<Self> {
        self.0.with_tau(tau).map(Self).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("ModelParams(l={}, h={}, tau={})", self.0.l(), self.0.h(), self.0.tau())
    }
}

/// `(R_1..R_n, p_1..p_n)` from the state-vector engine.
#[pyfunction]
#[pyo3(signature = (params, steps, tolerance = propagator::DEFAULT_TOLERANCE, cap = protocol::DEFAULT_STATEVECTOR_CAP))]
fn survival_statevector(
    params: &ModelParams,
    steps: usize,
    tolerance: f64,
    cap: usize,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let opts = ProtocolOptions {
        plan_tolerance: tolerance,
        cap,
        ..Default::default()
    };
    let run = protocol::run_protocol_opts(&params.0, steps, &opts).map_err(err)?;
    Ok((run.survival, run.first_detection))
}

/// `(R_1..R_n, p_1..p_n)` from the free-fermion engine.
#[pyfunction]
#[pyo3(signature = (params, steps, precision = "compensated"))]
fn survival_freefermion(params: &ModelParams, steps: usize, precision: &str) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let opts = FreeFermionOptions {
        precision: self::precision(precision)?,
        ..Default::default()
    };
    let run = freefermion::survival_large_l(&params.0, steps, &opts).map_err(err)?;
    Ok((run.survival, run.first_detection))
}

/// Survival curves for every tau, computed in parallel.
#[pyfunction]
#[pyo3(signature = (l, h, taus, steps, engine = "freefermion", precision = "compensated"))]
fn survival_sweep(
    py: Python<'_>,
    l: usize,
    h: f64,
    taus: Vec<f64>,
    steps: usize,
    engine: &str,
    precision: &str,
) -> PyResult<Vec<Vec<f64>>> {
    let opts = EngineOptions {
        precision: self::precision(precision)?,
        ..EngineOptions::with_engine(self::engine(engine)?)
    };
    let grid = TauGrid::from_values(taus).map_err(err)?;
    let series = py
        .allow_threads(|| sweep::survival_sweep(l, h, &grid, steps, &opts))
        .map_err(err)?;
    Ok(series.into_iter().map(|s| s.survival).collect())
}

/// `(k, lambda_k)` for each positive-momentum mode.
#[pyfunction]
fn modes(params: &ModelParams) -> Vec<(f64, f64)> {
    freefermion::build_modes(&params.0)
        .modes()
        .iter()
        .map(|m| (m.k, m.lambda))
        .collect()
}

/// `f_0 .. f_{n_max}`.
#[pyfunction]
fn overlaps(params: &ModelParams, n_max: usize) -> Vec<Complex64> {
    let modes = freefermion::build_modes(&params.0);
    OverlapSeries::compute(&modes, params.0.tau(), n_max).values().to_vec()
}

/// First-detection amplitudes `c_0 .. c_{n_max}`.
#[pyfunction]
#[pyo3(signature = (params, n_max, precision = "compensated"))]
fn recursion_coefficients(params: &ModelParams, n_max: usize, precision: &str) -> PyResult<Vec<Complex64>> {
    let modes = freefermion::build_modes(&params.0);
    let f = OverlapSeries::compute(&modes, params.0.tau(), n_max);
    freefermion::recursion_coefficients(&f, n_max, self::precision(precision)?).map_err(err)
}

/// Modulus and continuous phase of `f_n`.
#[pyfunction]
fn rho_phi(params: &ModelParams, n: usize) -> (f64, f64) {
    let modes = freefermion::build_modes(&params.0);
    freefermion::rho_phi(&modes, params.0.tau(), n)
}

#[pyfunction]
fn alpha(params: &ModelParams) -> f64 {
    freefermion::alpha(&params.0)
}

/// `exp(-i H tau) psi` through the Chebyshev propagator.
#[pyfunction]
#[pyo3(signature = (amplitudes, h, tau, tolerance = propagator::DEFAULT_TOLERANCE))]
fn evolve(amplitudes: Vec<Complex64>, h: f64, tau: f64, tolerance: f64) -> PyResult<Vec<Complex64>> {
    let psi = state(amplitudes)?;
    let params = mipt_core::ModelParams::new(psi.num_sites(), h, tau).map_err(err)?;
    let plan = propagator::make_plan(&params, tolerance).map_err(err)?;
    Ok(propagator::evolve(&plan, &psi).map_err(err)?.into_amplitudes())
}

/// Schmidt probabilities across the cut after the first `block` sites.
#[pyfunction]
fn schmidt_spectrum(amplitudes: Vec<Complex64>, block: usize) -> PyResult<Vec<f64>> {
    let psi = state(amplitudes)?;
    let spec = BipartitionSpec::new(psi.num_sites(), block).map_err(err)?;
    entanglement::schmidt_spectrum(&psi, &spec).map_err(err)
}

/// Von Neumann entropy (nats) of the first `block` sites.
#[pyfunction]
fn entropy(amplitudes: Vec<Complex64>, block: usize) -> PyResult<f64> {
    let psi = state(amplitudes)?;
    let spec = BipartitionSpec::new(psi.num_sites(), block).map_err(err)?;
    entanglement::entropy(&psi, &spec).map_err(err)
}

/// Geometric measure of genuine multipartite entanglement.
#[pyfunction]
#[pyo3(signature = (amplitudes, splits = "prefixes"))]
fn ggm(amplitudes: Vec<Complex64>, splits: &str) -> PyResult<f64> {
    entanglement::ggm_with(&state(amplitudes)?, self::splits(splits)?).map_err(err)
}

/// Per-step entanglement records of a state-vector run, as dicts.
#[pyfunction]
#[pyo3(signature = (params, steps, blocks = None, splits = "prefixes"))]
fn entanglement_series<'py>(
    py: Python<'py>,
    params: &ModelParams,
    steps: usize,
    blocks: Option<Vec<usize>>,
    splits: &str,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let blocks = blocks.unwrap_or_else(|| vec![(params.0.l() / 4).max(1)]);
    let splits = self::splits(splits)?;
    let opts = EngineOptions::with_engine(Engine::StateVector);
    let records = py
        .allow_threads(|| sweep::entanglement_series(&params.0, steps, &blocks, splits, &opts))
        .map_err(err)?;
    records
        .into_iter()
        .map(|r| {
            let d = PyDict::new_bound(py);
            d.set_item("n", r.n)?;
            d.set_item("survival", r.survival)?;
            d.set_item("entropies", r.entropies)?;
            d.set_item("ggm", r.ggm)?;
            d.set_item("sag", r.sag)?;
            d.set_item("cumulative_sag", r.cumulative_sag)?;
            Ok(d)
        })
        .collect()
}

/// Plateau height of a survival curve: `(height, window_start, cutoff, fallback)`.
#[pyfunction]
#[pyo3(signature = (survival, n_min = 2, window = 5, delta = 1e-3))]
fn plateau_height(
    survival: Vec<f64>,
    n_min: usize,
    window: usize,
    delta: f64,
) -> PyResult<(f64, Option<usize>, usize, bool)> {
    let cfg = PlateauConfig { n_min, window, delta };
    let p = analysis::plateau_height(&survival, &cfg).map_err(err)?;
    Ok((p.height, p.window_start, p.cutoff, p.fallback))
}

/// `(midpoints, slopes)` of consecutive points.
#[pyfunction]
fn two_point_derivative(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    analysis::two_point_derivative(&xs, &ys).map_err(err)
}

/// `(x, value, index, boundary)` of the maximum.
#[pyfunction]
fn peak_location(xs: Vec<f64>, values: Vec<f64>) -> PyResult<(f64, f64, usize, bool)> {
    let p = analysis::peak_location(&xs, &values).map_err(err)?;
    Ok((p.x, p.value, p.index, p.boundary))
}

/// Least-squares `R_n ~ a - b ln n` over `n_lo..=n_hi`: `(a, b, r_squared)`.
#[pyfunction]
fn log_decay_fit(survival: Vec<f64>, n_lo: usize, n_hi: usize) -> PyResult<(f64, f64, f64)> {
    let f = analysis::log_decay_fit(&survival, n_lo, n_hi).map_err(err)?;
    Ok((f.a, f.b, f.r_squared))
}

/// `(tau_c, peak slope, midpoints, slopes)` of `H(tau)`.
#[pyfunction]
#[pyo3(signature = (l, h, taus, steps, engine = "freefermion"))]
fn transition_scan(
    py: Python<'_>,
    l: usize,
    h: f64,
    taus: Vec<f64>,
    steps: usize,
    engine: &str,
) -> PyResult<(f64, f64, Vec<f64>, Vec<f64>)> {
    let opts = EngineOptions::with_engine(self::engine(engine)?);
    let grid = TauGrid::from_values(taus).map_err(err)?;
    let scan = py
        .allow_threads(|| sweep::transition_scan(l, h, &grid, steps, &opts, &PlateauConfig::default()))
        .map_err(err)?;
    Ok((scan.tau_c(), scan.peak.value, scan.midpoints, scan.slopes))
}

/// Runs the self-check suite: list of `(name, passed, observed, tolerance)`.
#[pyfunction]
#[pyo3(signature = (steps = 100, seed = 7))]
fn validate(py: Python<'_>, steps: usize, seed: u64) -> PyResult<Vec<(String, bool, f64, f64)>> {
    let cfg = ValidationConfig {
        seed,
        steps,
        ..Default::default()
    };
    let report = py.allow_threads(|| run_validation(&cfg)).map_err(err)?;
    Ok(report
        .checks
        .into_iter()
        .map(|c| (c.name, c.passed, c.observed, c.tolerance))
        .collect())
}

#[pymodule]
fn mipt(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<ModelParams>()?;
    m.add_function(wrap_pyfunction!(survival_statevector, m)?)?;
    m.add_function(wrap_pyfunction!(survival_freefermion, m)?)?;
    m.add_function(wrap_pyfunction!(survival_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(modes, m)?)?;
    m.add_function(wrap_pyfunction!(overlaps, m)?)?;
    m.add_function(wrap_pyfunction!(recursion_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(rho_phi, m)?)?;
    m.add_function(wrap_pyfunction!(alpha, m)?)?;
    m.add_function(wrap_pyfunction!(evolve, m)?)?;
    m.add_function(wrap_pyfunction!(schmidt_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(entropy, m)?)?;
    m.add_function(wrap_pyfunction!(ggm, m)?)?;
    m.add_function(wrap_pyfunction!(entanglement_series, m)?)?;
    m.add_function(wrap_pyfunction!(plateau_height, m)?)?;
    m.add_function(wrap_pyfunction!(two_point_derivative, m)?)?;
    m.add_function(wrap_pyfunction!(peak_location, m)?)?;
    m.add_function(wrap_pyfunction!(log_decay_fit, m)?)?;
    m.add_function(wrap_pyfunction!(transition_scan, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    Ok(())
}
