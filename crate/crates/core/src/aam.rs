//! Primal-dual accelerated alternating maximisation with two blocks (λ and μ).
//!
//! The descent step is an exact block maximisation solved by
//! [`crate::threshold`]; only the block with the larger gradient norm moves.

use ndarray::ArrayView1;

use crate::dual::{blend_plan_stats, evaluate_dual, linear_terms, plan_stats, PlanStats};
use crate::error::{Error, Result};
use crate::solver::{
    accelerated_stop, value_slack, Fidelity, Recorder, Snapshot, SolveResult, SolverOptions, MAX_DOUBLINGS,
};
use crate::threshold::{maximise_lambda, maximise_mu};
use crate::types::{DualPoint, Problem, TransportPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Lambda,
    Mu,
}

/// λ iff `‖∇_λ φ‖₂ > ‖∇_μ φ‖₂`; ties go to μ.
pub fn choose_block(grad_lambda: ArrayView1<'_, f64>, grad_mu: ArrayView1<'_, f64>) -> Block {
    if grad_lambda.dot(&grad_lambda) > grad_mu.dot(&grad_mu) {
        Block::Lambda
    } else {
        Block::Mu
    }
}

#[derive(Debug, Clone)]
pub struct AamState {
    pub lipschitz: f64,
    pub alpha: f64,
    pub point: DualPoint,
    pub momentum_point: DualPoint,
    pub extrapolation_point: DualPoint,
    pub point_value: f64,
    pub plan_avg: TransportPlan,
    /// [`plan_stats`] of `plan_avg`.
    pub avg_stats: PlanStats,
    /// Total weight carried by `plan_avg`; stays 1 when the recursion is consistent.
    pub weight_sum: f64,
    pub last_block: Option<Block>,
    pub iter: usize,
}

#[derive(Debug, Clone)]
pub struct Aam<'p> {
    problem: &'p Problem,
    fidelity: Fidelity,
    state: AamState,
}

impl<'p> Aam<'p> {
    pub fn new(problem: &'p Problem, lipschitz0: f64, fidelity: Fidelity) -> Result<Self> {
        if !(lipschitz0 > 0.0 && lipschitz0.is_finite()) {
            return Err(Error::Instance(format!("L0 must be positive, got {lipschitz0}")));
        }
        let (n, m) = (problem.n(), problem.m());
        let zero = DualPoint::zeros(n, m);
        Ok(Self {
            problem,
            fidelity,
            state: AamState {
                lipschitz: lipschitz0,
                alpha: 0.0,
                point: zero.clone(),
                momentum_point: zero.clone(),
                extrapolation_point: zero,
                point_value: 0.0,
                plan_avg: TransportPlan::zeros(n, m),
                avg_stats: plan_stats(problem, &TransportPlan::zeros(n, m)),
                weight_sum: 0.0,
                last_block: None,
                iter: 0,
            },
        })
    }

    pub fn state(&self) -> &AamState {
        &self.state
    }

    /// `α_{k+1}` for a trial `L_{k+1}`.
    pub fn step_coefficient(&self, lipschitz: f64) -> f64 {
        let s = &self.state;
        let base = 1.0 / (4.0 * lipschitz * lipschitz);
        match self.fidelity {
            Fidelity::Corrected => {
                0.5 / lipschitz + (base + s.alpha * s.alpha * s.lipschitz / lipschitz).sqrt()
            }
            Fidelity::Printed => 1.0 / lipschitz + (base + s.alpha * s.lipschitz / lipschitz).sqrt(),
        }
    }

    pub fn step(&mut self) -> Result<()> {
        let p = self.problem;
        let s = &self.state;
        let mut lipschitz = 0.5 * s.lipschitz;
        for _ in 0..MAX_DOUBLINGS {
            let alpha = self.step_coefficient(lipschitz);
            let tau = 1.0 / (alpha * lipschitz);
            let tilde = s.point.lerp(&s.momentum_point, tau);
            let at_tilde = evaluate_dual(p, &tilde);
            let (gl, gm) = at_tilde.gradient(p);
            let block = choose_block(gl.view(), gm.view());
            let mut next = tilde.clone();
            let sq = match block {
                Block::Lambda => maximise_lambda(p, &tilde.mu, &mut next.lambda),
                Block::Mu => maximise_mu(p, &tilde.lambda, &mut next.mu),
            };
            let next_value = match self.fidelity {
                Fidelity::Corrected => -sq / (2.0 * p.gamma) - linear_terms(p, &next),
                Fidelity::Printed => {
                    // The untouched block reverts to the previous point, so
                    // the square sum from the block solve no longer applies.
                    match block {
                        Block::Lambda => next.mu = s.point.mu.clone(),
                        Block::Mu => next.lambda = s.point.lambda.clone(),
                    }
                    evaluate_dual(p, &next).value
                }
            };
            let grad_sq = gl.dot(&gl) + gm.dot(&gm);
            let required = at_tilde.value + grad_sq / (2.0 * lipschitz);
            if next_value >= required - value_slack(&[next_value, at_tilde.value]) {
                let base = match self.fidelity {
                    Fidelity::Corrected => &s.momentum_point,
                    Fidelity::Printed => &s.point,
                };
                let momentum = DualPoint {
                    lambda: &base.lambda + &(&gl * alpha),
                    mu: &base.mu + &(&gm * alpha),
                };
                let keep = s.alpha * s.alpha * s.lipschitz / (alpha * alpha * lipschitz);
                let weight_sum = keep * s.weight_sum + tau;
                let mut plan_avg = std::mem::replace(&mut self.state.plan_avg, TransportPlan::zeros(0, 0));
                let avg_stats = blend_plan_stats(p, &tilde, keep, tau, plan_avg.as_slice_mut());
                self.state = AamState {
                    lipschitz,
                    alpha,
                    point: next,
                    momentum_point: momentum,
                    extrapolation_point: tilde,
                    point_value: next_value,
                    plan_avg,
                    avg_stats,
                    weight_sum,
                    last_block: Some(block),
                    iter: self.state.iter + 1,
                };
                return Ok(());
            }
            lipschitz *= 2.0;
        }
        Err(Error::Numerical(format!(
            "line search exceeded {MAX_DOUBLINGS} doublings at iteration {}",
            self.state.iter + 1
        )))
    }
}

/// Runs until `f(X_k) − φ(λ_k, μ_k) ≤ eps` and `‖A[X_k] − B‖₂² ≤ eps²`.
pub fn run_aam(p: &Problem, eps: f64, lipschitz0: f64, opts: &SolverOptions) -> Result<SolveResult> {
    if !(eps > 0.0) {
        return Err(Error::Instance(format!("eps must be positive, got {eps}")));
    }
    let mut solver = Aam::new(p, lipschitz0, opts.fidelity)?;
    let mut recorder = Recorder::new(opts);
    let mut converged = false;
    for k in 1..=opts.max_iter {
        solver.step()?;
        let s = solver.state();
        let stats = s.avg_stats.clone();
        let gap = stats.primal_value - s.point_value;
        converged = accelerated_stop(gap, &stats.residuals, eps);
        let stop = converged || k == opts.max_iter || recorder.out_of_time();
        if recorder.wants(k, stop) {
            recorder.record(
                p,
                k,
                Snapshot {
                    primal_f: stats.primal_value,
                    dual_phi: s.point_value,
                    residuals: stats.residuals,
                    sparsity: stats.sparsity,
                    plan: &s.plan_avg,
                },
            );
        }
        if stop {
            break;
        }
    }
    let s = solver.state;
    Ok(SolveResult {
        plan: s.plan_avg,
        dual: s.point,
        trace: recorder.records,
        iterations: s.iter,
        converged,
    })
}
