//! Python bindings for the `mustructure` crate.

use std::path::PathBuf;

use mustructure::cli::{self, CheckName, Run, RunArgs};
use mustructure::exprlang::{self, Var};
use mustructure::relaxation;
use mustructure::TangentFrame;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

create_exception!(mustructure, MustructureError, PyException, "Raised with (message, exit_code).");

fn to_py(e: mustructure::Error) -> PyErr {
    MustructureError::new_err((e.to_string(), e.exit_code()))
}

fn load(config: PathBuf, seed: Option<u64>) -> PyResult<Run> {
    Run::load(&RunArgs { config, out: None, seed }).map_err(to_py)
}

fn expr(text: &str) -> PyResult<exprlang::Expr> {
    exprlang::parse(text).map_err(|e| to_py(e.into()))
}

/// Canonical printed form of an expression.
#[pyfunction]
fn parse_expr(text: &str) -> PyResult<String> {
    Ok(expr(text)?.to_string())
}

#[pyfunction]
fn eval_expr(text: &str, point: [f64; 3]) -> PyResult<f64> {
    expr(text)?.eval_at(point).map_err(|e| to_py(e.into()))
}

/// Symbolic derivative with respect to "x", "y" or "z".
#[pyfunction]
fn differentiate(text: &str, var: &str) -> PyResult<String> {
    let v = Var::ALL
        .into_iter()
        .find(|v| v.name() == var)
        .ok_or_else(|| PyValueError::new_err(format!("unknown variable {var:?}")))?;
    Ok(expr(text)?.differentiate(v).to_string())
}

/// Relaxed matrix B_μ for a constant B and tangent vectors spanning T_μ.
#[pyfunction]
fn relax(b: [[f64; 3]; 3], tangents: Vec<[f64; 3]>) -> PyResult<[[f64; 3]; 3]> {
    let frame = TangentFrame::from_vectors([0.0; 3], &tangents);
    let (bmu, _, _) = relaxation::relax_matrix(&b, &frame).map_err(|e| to_py(e.into()))?;
    Ok(bmu)
}

/// Solves a run configuration; returns the nodal rows
/// (component_id, x, y, z, value) and the solver report as JSON.
#[pyfunction]
#[pyo3(signature = (config, h=None))]
fn solve(config: PathBuf, h: Option<f64>) -> PyResult<(Vec<(u32, f64, f64, f64, f64)>, String)> {
    let run = load(config, None)?;
    let s = cli::solve_at(&run.cfg, h).map_err(to_py)?;
    let mut rows = Vec::new();
    for (c, mesh) in s.structure.meshes.iter().enumerate() {
        let id = s.structure.components[c].id;
        for (n, p) in mesh.points.iter().enumerate() {
            rows.push((id, p[0], p[1], p[2], s.solution.node_value(c, n)));
        }
    }
    let report = serde_json::json!({ "solve": s.report, "errors": s.errors });
    Ok((rows, report.to_string()))
}

/// Rows (h, l2_error, h1_error) over the configured mesh sweep.
#[pyfunction]
fn convergence(config: PathBuf) -> PyResult<Vec<(f64, f64, f64)>> {
    let run = load(config, None)?;
    let rates = cli::convergence_sweep(&run.cfg).map_err(to_py)?;
    Ok(rates.levels.iter().map(|r| (r.h, r.l2_error, r.h1_error)).collect())
}

/// Regularity report as JSON.
#[pyfunction]
#[pyo3(signature = (config, check="all", seed=None))]
fn verify(config: PathBuf, check: &str, seed: Option<u64>) -> PyResult<String> {
    let which = CheckName::EACH
        .into_iter()
        .chain([CheckName::All])
        .find(|c| c.name() == check)
        .ok_or_else(|| PyValueError::new_err(format!("unknown check {check:?}")))?;
    let run = load(config, seed)?;
    Ok(cli::verify_report(&run, which).map_err(to_py)?.to_json())
}

#[pymodule]
#[pyo3(name = "mustructure")]
fn py_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("MustructureError", m.py().get_type::<MustructureError>())?;
    m.add_function(wrap_pyfunction!(parse_expr, m)?)?;
    m.add_function(wrap_pyfunction!(eval_expr, m)?)?;
    m.add_function(wrap_pyfunction!(differentiate, m)?)?;
    m.add_function(wrap_pyfunction!(relax, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(convergence, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
