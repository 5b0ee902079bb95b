//! Euclidean Sinkhorn–Knopp: alternate exact maximisation over λ and μ.

use crate::dual::{evaluate_dual, recover_plan, DualEval};
use crate::error::{Error, Result};
use crate::solver::{Recorder, Snapshot, SolveResult, SolverOptions};
use crate::threshold::{maximise_lambda, maximise_mu};
use crate::types::{DualPoint, Problem};

/// Iterate state. Each [`step`](Self::step) is one half-iteration.
#[derive(Debug, Clone)]
pub struct EuclideanSinkhorn<'p> {
    problem: &'p Problem,
    dual: DualPoint,
    iter: usize,
    lambda_first: bool,
}

impl<'p> EuclideanSinkhorn<'p> {
    pub fn new(problem: &'p Problem) -> Self {
        Self {
            problem,
            dual: DualPoint::zeros(problem.n(), problem.m()),
            iter: 0,
            lambda_first: true,
        }
    }

    /// Update μ on even iterations instead of λ.
    pub fn mu_first(mut self) -> Self {
        self.lambda_first = false;
        self
    }

    pub fn dual(&self) -> &DualPoint {
        &self.dual
    }

    pub fn iterations(&self) -> usize {
        self.iter
    }

    /// Whether the next step updates λ.
    pub fn next_is_lambda(&self) -> bool {
        self.iter.is_multiple_of(2) == self.lambda_first
    }

    /// Performs one block update and evaluates the new point.
    pub fn step(&mut self) -> DualEval {
        let p = self.problem;
        if self.next_is_lambda() {
            let mu = self.dual.mu.clone();
            maximise_lambda(p, &mu, &mut self.dual.lambda);
        } else {
            let lambda = self.dual.lambda.clone();
            maximise_mu(p, &lambda, &mut self.dual.mu);
        }
        self.iter += 1;
        evaluate_dual(p, &self.dual)
    }
}

/// Runs until `‖X1 − a‖₁ + ‖Xᵀ1 − b‖₁ ≤ eps_marginal` or `max_iter` half-iterations.
pub fn run_euclidean_sinkhorn(p: &Problem, eps_marginal: f64, opts: &SolverOptions) -> Result<SolveResult> {
    if !(eps_marginal > 0.0) {
        return Err(Error::Instance(format!("marginal tolerance must be positive, got {eps_marginal}")));
    }
    let mut recorder = Recorder::new(opts);
    let mut state = EuclideanSinkhorn::new(p);
    let mut converged = false;
    for k in 1..=opts.max_iter {
        let eval = state.step();
        let residuals = eval.residuals(p);
        converged = residuals.l1() <= eps_marginal;
        let stop = converged || k == opts.max_iter || recorder.out_of_time();
        if recorder.wants(k, stop) {
            let plan = recover_plan(p, state.dual())?;
            recorder.record(
                p,
                k,
                Snapshot {
                    primal_f: eval.primal_value(p.gamma),
                    dual_phi: eval.value,
                    residuals,
                    sparsity: eval.sparsity(p),
                    plan: &plan,
                },
            );
        }
        if stop {
            break;
        }
    }
    Ok(SolveResult {
        plan: recover_plan(p, state.dual())?,
        dual: state.dual,
        trace: recorder.records,
        iterations: state.iter,
        converged,
    })
}
