//! Python bindings. Operators are passed as Pauli-sum text (`"0.5 XX\n0.2 ZI"`)
//! or as built-in problem names; matrices come back as nested lists.

use hermex::expressibility::{ExprConfig, Template};
use hermex::linalg::CMatrix;
use hermex::pauli::PauliSum;
use hermex::problems;
use hermex::simulator;
use hermex::strategy1::{self, Strategy1Config};
use hermex::strategy2::{self, Strategy2Config};
use num_complex::Complex64;
use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: hermex::Error) -> PyErr {
    match e {
        hermex::Error::Unknown { .. } => PyKeyError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_rows(m: &CMatrix) -> Vec<Vec<Complex64>> {
    (0..m.dim()).map(|r| m.row(r).to_vec()).collect()
}

fn from_rows(rows: Vec<Vec<Complex64>>) -> PyResult<CMatrix> {
    let d = rows.len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    Ok(CMatrix::from_fn(d, |r, c| rows[r][c]))
}

/// Built-in name or Pauli-sum text.
fn operator(op: &str) -> PyResult<PauliSum> {
    if problems::BUILTINS.contains(&op) {
        problems::builtin(op).and_then(|p| p.operator.pauli_sum()).map_err(err)
    } else {
        PauliSum::parse(op).map_err(err)
    }
}

/// Names of the built-in problems.
#[pyfunction]
fn problem_names() -> Vec<&'static str> {
    problems::BUILTINS.to_vec()
}

/// Pauli-sum text of a built-in problem.
#[pyfunction]
fn problem_operator(name: &str) -> PyResult<String> {
    let p = problems::builtin(name).map_err(err)?;
    Ok(p.operator.pauli_sum().map_err(err)?.to_text())
}

/// `e^{-iHt}` as a nested list of complex numbers.
#[pyfunction]
fn exact_unitary(op: &str, t: f64) -> PyResult<Vec<Vec<Complex64>>> {
    let u = simulator::exact_unitary(&operator(op)?, t).map_err(err)?;
    Ok(to_rows(&u))
}

/// `|Tr(V†U)/d|²`.
#[pyfunction]
fn process_fidelity(u: Vec<Vec<Complex64>>, v: Vec<Vec<Complex64>>) -> PyResult<f64> {
    let (u, v) = (from_rows(u)?, from_rows(v)?);
    if u.dim() != v.dim() {
        return Err(PyValueError::new_err("matrices differ in size"));
    }
    Ok(simulator::process_fidelity(&u, &v))
}

#[pyfunction]
#[pyo3(signature = (op, t, seed=0, layers=1, eta=0.02, max_iters=300))]
fn train_strategy1<'py>(
    py: Python<'py>,
    op: &str,
    t: f64,
    seed: u64,
    layers: usize,
    eta: f64,
    max_iters: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let h = operator(op)?;
    let cfg = Strategy1Config {
        t,
        seed,
        eta,
        max_iters,
        ..Default::default()
    };
    let ansatz = strategy1::default_ansatz(&h, t, layers).map_err(err)?;
    let trace = py
        .detach(|| strategy1::run(&cfg, &ansatz, &h, None))
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("final_fidelity", trace.final_objective())?;
    d.set_item("iterations", trace.iterations.len())?;
    d.set_item("restarts", trace.restarts_used)?;
    d.set_item("converged", trace.converged)?;
    d.set_item("objective", trace.iterations.iter().map(|r| r.objective).collect::<Vec<_>>())?;
    d.set_item("params", trace.final_params)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (op, t, seed=0, n_c=2, dt_ratio=1.0/1024.0))]
fn train_strategy2<'py>(
    py: Python<'py>,
    op: &str,
    t: f64,
    seed: u64,
    n_c: usize,
    dt_ratio: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let h = operator(op)?;
    let cfg = Strategy2Config {
        seed,
        n_c,
        dt_ratio,
        ..Default::default()
    };
    let out = py.detach(|| strategy2::run(&cfg, &h, t)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("final_fidelity", out.final_fidelity)?;
    d.set_item("stages", out.stages.len())?;
    d.set_item("stage_objectives", out.stages.iter().map(|s| s.objective).collect::<Vec<_>>())?;
    d.set_item("params", out.final_params)?;
    Ok(d)
}

/// Process infidelity of the first-order product formula with `n` steps.
#[pyfunction]
fn trotter_infidelity(op: &str, t: f64, n: usize) -> PyResult<f64> {
    let h = operator(op)?;
    let plan = hermex::baselines::TrotterPlan::new(h, t, n).map_err(err)?;
    hermex::baselines::trotter_process_infidelity(&plan).map_err(err)
}

/// KL divergence of a template's fidelity distribution from Haar.
#[pyfunction]
#[pyo3(signature = (template, layers=1, samples=5000, bins=75, qubits=4, seed=0))]
fn expressibility(
    py: Python<'_>,
    template: &str,
    layers: usize,
    samples: usize,
    bins: usize,
    qubits: usize,
    seed: u64,
) -> PyResult<f64> {
    let cfg = ExprConfig {
        template: template.parse::<Template>().map_err(err)?,
        layers,
        n_samples: samples,
        n_bins: bins,
        n_qubits: qubits,
        seed,
    };
    py.detach(|| hermex::expressibility::run(&cfg)).map(|r| r.kl).map_err(err)
}

#[pymodule]
fn hermex_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(problem_names, m)?)?;
    m.add_function(wrap_pyfunction!(problem_operator, m)?)?;
    m.add_function(wrap_pyfunction!(exact_unitary, m)?)?;
    m.add_function(wrap_pyfunction!(process_fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(train_strategy1, m)?)?;
    m.add_function(wrap_pyfunction!(train_strategy2, m)?)?;
    m.add_function(wrap_pyfunction!(trotter_infidelity, m)?)?;
    m.add_function(wrap_pyfunction!(expressibility, m)?)?;
    Ok(())
}
