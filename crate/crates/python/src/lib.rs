//! Python bindings: analytic calculators, BER approximations and sweeps.

use coopmud::analysis::{self, MudMode, PowerDistribution, SpecialCaseParams};
use coopmud::detectors;
use coopmud::harness::{run_sweep as core_run_sweep, RunOptions, SweepSpec};
use coopmud::sysmodel::CorrelationMatrix;
use coopmud::Error;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: Error) -> PyErr {
    match e {
        Error::Domain(_) | Error::Config(_) | Error::Capacity { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn power(powers: Vec<f64>, weights: Option<Vec<f64>>) -> PyResult<PowerDistribution> {
    let weights = weights.unwrap_or_else(|| vec![1.0 / powers.len().max(1) as f64; powers.len()]);
    PowerDistribution::new(powers, weights).map_err(err)
}

fn mode(name: &str) -> PyResult<MudMode> {
    match name {
        "individual" => Ok(MudMode::Individual),
        "joint" => Ok(MudMode::Joint),
        _ => Err(PyValueError::new_err(format!(
            "mode must be `individual` or `joint`, got `{name}`"
        ))),
    }
}

/// Gaussian tail probability.
#[pyfunction]
fn q_function(x: f64) -> f64 {
    detectors::q_function(x)
}

#[pyfunction]
fn spectral_efficiency(k: usize, n: usize) -> PyResult<f64> {
    analysis::spectral_efficiency(k, n).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (a1, a2, rho, ar = 0.0))]
fn asymptotic_efficiency(a1: f64, a2: f64, rho: f64, ar: f64) -> PyResult<f64> {
    analysis::asymptotic_efficiency_two_user(a1, a2, ar, rho).map_err(err)
}

#[pyfunction]
fn special_case_avg_ber(p_sd: f64, p_sr: f64, p_rd: f64, k: usize, m: usize) -> PyResult<f64> {
    let p = SpecialCaseParams::new(p_sd, p_sr, p_rd, k, m).map_err(err)?;
    Ok(analysis::special_case_avg_ber(&p))
}

#[pyfunction]
fn optimal_coding_set_size(p_sd: f64, p_sr: f64, p_rd: f64, k: usize) -> PyResult<usize> {
    analysis::optimal_coding_set_size(p_sd, p_sr, p_rd, k).map_err(err)
}

#[pyfunction]
fn large_system_decorrelator(beta: f64) -> PyResult<f64> {
    analysis::large_system_decorrelator(beta).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (beta, noise_power, powers = vec![1.0], weights = None))]
fn large_system_mmse(
    beta: f64,
    noise_power: f64,
    powers: Vec<f64>,
    weights: Option<Vec<f64>>,
) -> PyResult<f64> {
    analysis::large_system_mmse(beta, noise_power, &power(powers, weights)?).map_err(err)
}

/// Solver state as a dict with keys `e`, `f`, `m`, `q`, `eta`, `iterations`
/// and `residual`.
#[pyfunction]
#[pyo3(signature = (beta, noise_power, powers = vec![1.0], weights = None, mode = "individual"))]
fn large_system_optimal<'py>(
    py: Python<'py>,
    beta: f64,
    noise_power: f64,
    powers: Vec<f64>,
    weights: Option<Vec<f64>>,
    mode: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let st = analysis::large_system_optimal(
        beta,
        noise_power,
        &power(powers, weights)?,
        self::mode(mode)?,
    )
    .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("e", st.e)?;
    d.set_item("f", st.f)?;
    d.set_item("m", st.m)?;
    d.set_item("q", st.q)?;
    d.set_item("eta", st.eta)?;
    d.set_item("iterations", st.iterations)?;
    d.set_item("residual", st.residual)?;
    Ok(d)
}

/// Per-user BER of strongest-first cancellation.
#[pyfunction]
fn analytic_ber_sic(amplitudes: Vec<f64>, sigma: f64, spreading_gain: usize) -> PyResult<Vec<f64>> {
    detectors::analytic_ber_sic(&amplitudes, sigma, spreading_gain).map_err(err)
}

/// Upper bound on the ML BER of `user` for the correlation matrix `r`
/// (list of rows).
#[pyfunction]
fn analytic_ber_optimal_bound(
    amplitudes: Vec<f64>,
    r: Vec<Vec<f64>>,
    sigma: f64,
    user: usize,
) -> PyResult<f64> {
    let r = CorrelationMatrix::from_rows(&r).map_err(err)?;
    detectors::analytic_ber_optimal_bound(&amplitudes, &r, sigma, user).map_err(err)
}

/// Runs a sweep given as JSON (same fields as the `[sweep]` table of a CLI
/// config) and returns the result table as JSON.
#[pyfunction]
#[pyo3(signature = (spec_json, workers = None, batch_frames = 1024))]
fn run_sweep(
    py: Python<'_>,
    spec_json: &str,
    workers: Option<usize>,
    batch_frames: u64,
) -> PyResult<String> {
    let spec: SweepSpec =
        serde_json::from_str(spec_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let mut opts = RunOptions {
        batch_frames,
        ..RunOptions::default()
    };
    if let Some(w) = workers {
        opts.workers = w;
    }
    let table = py.detach(|| core_run_sweep(&spec, &opts)).map_err(err)?;
    serde_json::to_string(&table).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
fn pycoopmud(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(q_function, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_efficiency, m)?)?;
    m.add_function(wrap_pyfunction!(asymptotic_efficiency, m)?)?;
    m.add_function(wrap_pyfunction!(special_case_avg_ber, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_coding_set_size, m)?)?;
    m.add_function(wrap_pyfunction!(large_system_decorrelator, m)?)?;
    m.add_function(wrap_pyfunction!(large_system_mmse, m)?)?;
    m.add_function(wrap_pyfunction!(large_system_optimal, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_ber_sic, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_ber_optimal_bound, m)?)?;
    m.add_function(wrap_pyfunction!(run_sweep, m)?)?;
    Ok(())
}
