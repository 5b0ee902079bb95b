//! Python bindings. Vectors are passed as lists of floats and matrices as
//! lists of rows.

use eot_core::oracle::lp_transport_simplex;
use eot_core::{
    CostMatrix, DualPoint, Fidelity, Measure, Method, PipelineConfig, TraceRecord, TransportPlan,
};
use ndarray::Array2;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

/// (iter, primal_f, dual_phi, gap, row_l1, col_l1, rounded_cost, sparsity).
type TraceRow = (usize, f64, f64, f64, f64, f64, f64, f64);

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn core_err(e: eot_core::Error) -> PyErr {
    match e {
        eot_core::Error::Numerical(msg) | eot_core::Error::Oracle(msg) => PyRuntimeError::new_err(msg),
        other => value_err(other),
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Array2<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(value_err("matrix rows have different lengths"));
    }
    Array2::from_shape_vec((n, m), rows.into_iter().flatten().collect()).map_err(value_err)
}

fn rows(x: &TransportPlan) -> Vec<Vec<f64>> {
    x.entries().rows().into_iter().map(|r| r.to_vec()).collect()
}

fn measure(w: Vec<f64>, normalise: bool) -> PyResult<Measure> {
    if normalise { Measure::normalised(w) } else { Measure::new(w) }.map_err(core_err)
}

/// Regularised transport problem with squared-ℓ2 penalty `gamma`.
#[pyclass(name = "Problem", frozen)]
struct PyProblem {
    inner: eot_core::Problem,
}

#[pymethods]
impl PyProblem {
    #[new]
    #[pyo3(signature = (a, b, cost, gamma, normalise=false))]
    fn new(a: Vec<f64>, b: Vec<f64>, cost: Vec<Vec<f64>>, gamma: f64, normalise: bool) -> PyResult<Self> {
        let cost = CostMatrix::new(matrix(cost)?).map_err(core_err)?;
        let inner =
            eot_core::Problem::new(measure(a, normalise)?, measure(b, normalise)?, cost, gamma).map_err(core_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.n(), self.inner.m())
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.inner.gamma
    }

    fn dual_objective(&self, lam: Vec<f64>, mu: Vec<f64>) -> PyResult<f64> {
        let d = DualPoint::new(lam, mu).map_err(core_err)?;
        eot_core::dual_objective(&self.inner, &d).map_err(core_err)
    }

    fn dual_gradient(&self, lam: Vec<f64>, mu: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let d = DualPoint::new(lam, mu).map_err(core_err)?;
        let (gl, gm) = eot_core::dual_gradient(&self.inner, &d).map_err(core_err)?;
        Ok((gl.to_vec(), gm.to_vec()))
    }

    fn recover_plan(&self, lam: Vec<f64>, mu: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        let d = DualPoint::new(lam, mu).map_err(core_err)?;
        Ok(rows(&eot_core::recover_plan(&self.inner, &d).map_err(core_err)?))
    }

    fn primal_objective(&self, plan: Vec<Vec<f64>>) -> PyResult<f64> {
        let x = TransportPlan::new(matrix(plan)?).map_err(core_err)?;
        eot_core::primal_objective(&self.inner, &x).map_err(core_err)
    }

    fn __repr__(&self) -> String {
        format!("Problem(n={}, m={}, gamma={})", self.inner.n(), self.inner.m(), self.inner.gamma)
    }
}

/// Output of [`approx_ot`].
#[pyclass(name = "OtResult", frozen, get_all)]
struct PyOtResult {
    /// Rounded plan with exact marginals.
    plan: Vec<Vec<f64>>,
    /// Solver plan before rounding.
    solver_plan: Vec<Vec<f64>>,
    cost: f64,
    iterations: usize,
    converged: bool,
    gamma: f64,
    sparsity: f64,
    /// One tuple per recorded iteration.
    trace: Vec<TraceRow>,
}

#[pymethods]
impl PyOtResult {
    fn __repr__(&self) -> String {
        format!(
            "OtResult(cost={:.6e}, iterations={}, converged={}, sparsity={:.4})",
            self.cost, self.iterations, self.converged, self.sparsity
        )
    }
}

fn trace_row(r: &TraceRecord) -> TraceRow {
    (r.iter, r.primal_f, r.dual_phi, r.gap, r.residuals.row_l1, r.residuals.col_l1, r.unregularised_cost, r.sparsity)
}

/// ε-accurate transport plan: regularise, solve, round.
#[pyfunction]
#[pyo3(signature = (a, b, cost, method, epsilon, seed=0, max_iter=100_000, fidelity="corrected", normalise=true))]
#[allow(clippy::too_many_arguments)]
fn approx_ot(
    a: Vec<f64>,
    b: Vec<f64>,
    cost: Vec<Vec<f64>>,
    method: &str,
    epsilon: f64,
    seed: u64,
    max_iter: usize,
    fidelity: &str,
    normalise: bool,
) -> PyResult<PyOtResult> {
    let method: Method = method.parse().map_err(value_err)?;
    let fidelity: Fidelity = fidelity.parse().map_err(value_err)?;
    let (a, b) = (measure(a, normalise)?, measure(b, normalise)?);
    let cost = CostMatrix::new(matrix(cost)?).map_err(core_err)?;
    let cfg = PipelineConfig::new(method, epsilon).seed(seed).max_iter(max_iter).fidelity(fidelity);
    let out = eot_core::approx_ot(&a, &b, &cost, &cfg).map_err(core_err)?;
    Ok(PyOtResult {
        plan: rows(&out.plan),
        solver_plan: rows(&out.solver_plan),
        cost: out.cost,
        iterations: out.iterations,
        converged: out.converged,
        gamma: out.gamma,
        sparsity: out.sparsity,
        trace: out.trace.iter().map(trace_row).collect(),
    })
}

/// Projects a nonnegative matrix onto the plans with marginals `a`, `b`.
#[pyfunction]
fn round_to_polytope(plan: Vec<Vec<f64>>, a: Vec<f64>, b: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
    let x = TransportPlan::new(matrix(plan)?).map_err(core_err)?;
    let out = eot_core::round_to_polytope(&x, &measure(a, false)?, &measure(b, false)?).map_err(core_err)?;
    Ok(rows(&out))
}

/// Returns `(lam, active_count)` with `sum_j max(-v_j - lam, 0) = target`.
#[pyfunction]
fn threshold_solve(v: Vec<f64>, target: f64) -> PyResult<(f64, usize)> {
    let r = eot_core::threshold_solve(&v, target).map_err(core_err)?;
    Ok((r.value, r.active_count))
}

/// Exact optimal value and plan of the unregularised problem.
#[pyfunction]
fn lp_solve(a: Vec<f64>, b: Vec<f64>, cost: Vec<Vec<f64>>) -> PyResult<(f64, Vec<Vec<f64>>)> {
    let cost = CostMatrix::new(matrix(cost)?).map_err(core_err)?;
    let sol = lp_transport_simplex(&measure(a, true)?, &measure(b, true)?, &cost).map_err(core_err)?;
    Ok((sol.value, rows(&sol.plan)))
}

#[pymodule]
fn eot(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_class::<PyOtResult>()?;
    m.add_function(wrap_pyfunction!(approx_ot, m)?)?;
    m.add_function(wrap_pyfunction!(round_to_polytope, m)?)?;
    m.add_function(wrap_pyfunction!(threshold_solve, m)?)?;
    m.add_function(wrap_pyfunction!(lp_solve, m)?)?;
    m.add("METHODS", ["euclid-sinkhorn", "apdagd", "aam", "clvr", "entropy-sinkhorn"])?;
    Ok(())
}
