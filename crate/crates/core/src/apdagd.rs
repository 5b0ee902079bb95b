//! Adaptive primal-dual accelerated gradient ascent on the dual, with a
//! running average of primal plans.
//!
//! Each iteration backtracks on the local smoothness estimate `L`: it starts
//! from `L/2` and doubles until the concave descent inequality
//! `φ(new) ≥ φ(λ̃) + ⟨∇φ(λ̃), new − λ̃⟩ − (L/2)‖new − λ̃‖²` holds.

use crate::dual::{blend_plan_stats, evaluate_dual, plan_stats, PlanStats};
use crate::error::{Error, Result};
use crate::solver::{
    accelerated_stop, value_slack, Fidelity, Recorder, Snapshot, SolveResult, SolverOptions, MAX_DOUBLINGS,
};
use crate::types::{DualPoint, Problem, TransportPlan};

/// Positive root of `L·α² − α − β = 0`, i.e. `(1 + √(1 + 4Lβ)) / 2L`.
pub fn solve_step_coefficient(lipschitz: f64, beta: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * lipschitz * beta).sqrt()) / (2.0 * lipschitz)
}

/// Larger root of `L·α² − α + β = 0`; `None` once `4Lβ > 1`.
pub fn printed_step_coefficient(lipschitz: f64, beta: f64) -> Option<f64> {
    let disc = 1.0 - 4.0 * lipschitz * beta;
    (disc >= 0.0).then(|| (1.0 + disc.sqrt()) / (2.0 * lipschitz))
}

#[derive(Debug, Clone)]
pub struct ApdagdState {
    /// Accepted smoothness estimate `L_k`.
    pub lipschitz: f64,
    /// Last accepted step coefficient `α_k`.
    pub alpha: f64,
    /// `β_k`, the sum of accepted coefficients.
    pub beta: f64,
    /// `(λ_k, μ_k)`.
    pub point: DualPoint,
    /// `(λ'_k, μ'_k)`, the gradient-accumulating sequence.
    pub momentum_point: DualPoint,
    /// `(λ̃, μ̃)` where the last accepted gradient was taken.
    pub extrapolation_point: DualPoint,
    /// φ at `point`.
    pub point_value: f64,
    /// Weighted average of recovered plans.
    pub plan_avg: TransportPlan,
    /// [`plan_stats`] of `plan_avg`.
    pub avg_stats: PlanStats,
    pub iter: usize,
}

/// Solver driver; [`step`](Self::step) performs one accepted iteration.
#[derive(Debug, Clone)]
pub struct Apdagd<'p> {
    problem: &'p Problem,
    fidelity: Fidelity,
    state: ApdagdState,
}

impl<'p> Apdagd<'p> {
    pub fn new(problem: &'p Problem, lipschitz0: f64, fidelity: Fidelity) -> Result<Self> {
        if !(lipschitz0 > 0.0 && lipschitz0.is_finite()) {
            return Err(Error::Instance(format!("L0 must be positive, got {lipschitz0}")));
        }
        let (n, m) = (problem.n(), problem.m());
        let zero = DualPoint::zeros(n, m);
        Ok(Self {
            problem,
            fidelity,
            state: ApdagdState {
                lipschitz: lipschitz0,
                alpha: 0.0,
                beta: 0.0,
                point: zero.clone(),
                momentum_point: zero.clone(),
                extrapolation_point: zero,
                point_value: 0.0,
                plan_avg: TransportPlan::zeros(n, m),
                avg_stats: plan_stats(problem, &TransportPlan::zeros(n, m)),
                iter: 0,
            },
        })
    }

    pub fn state(&self) -> &ApdagdState {
        &self.state
    }

    fn coefficient(&self, lipschitz: f64) -> Result<f64> {
        match self.fidelity {
            Fidelity::Corrected => Ok(solve_step_coefficient(lipschitz, self.state.beta)),
            Fidelity::Printed => printed_step_coefficient(lipschitz, self.state.beta).ok_or_else(|| {
                Error::Numerical(format!(
                    "step equation has no real root (L = {lipschitz}, beta = {})",
                    self.state.beta
                ))
            }),
        }
    }

    pub fn step(&mut self) -> Result<()> {
        let p = self.problem;
        let s = &self.state;
        let mut lipschitz = 0.5 * s.lipschitz;
        for _ in 0..MAX_DOUBLINGS {
            let alpha = self.coefficient(lipschitz)?;
            let beta = s.beta + alpha;
            let tau = alpha / beta;
            let tilde = s.point.lerp(&s.momentum_point, tau);
            let at_tilde = evaluate_dual(p, &tilde);
            let (gl, gm) = at_tilde.gradient(p);
            let base = match self.fidelity {
                Fidelity::Corrected => &s.momentum_point,
                Fidelity::Printed => &s.point,
            };
            let momentum = DualPoint {
                lambda: &base.lambda + &(&gl * alpha),
                mu: &base.mu + &(&gm * alpha),
            };
            let next = s.point.lerp(&momentum, tau);
            let next_value = evaluate_dual(p, &next).value;
            let dl = &next.lambda - &tilde.lambda;
            let dm = &next.mu - &tilde.mu;
            let model = at_tilde.value + gl.dot(&dl) + gm.dot(&dm)
                - 0.5 * lipschitz * (dl.dot(&dl) + dm.dot(&dm));
            if next_value >= model - value_slack(&[next_value, at_tilde.value]) {
                let mut plan_avg = std::mem::replace(&mut self.state.plan_avg, TransportPlan::zeros(0, 0));
                let avg_stats = blend_plan_stats(p, &next, 1.0 - tau, tau, plan_avg.as_slice_mut());
                self.state = ApdagdState {
                    lipschitz,
                    alpha,
                    beta,
                    point: next,
                    momentum_point: momentum,
                    extrapolation_point: tilde,
                    point_value: next_value,
                    plan_avg,
                    avg_stats,
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
pub fn run_apdagd(p: &Problem, eps: f64, lipschitz0: f64, opts: &SolverOptions) -> Result<SolveResult> {
    if !(eps > 0.0) {
        return Err(Error::Instance(format!("eps must be positive, got {eps}")));
    }
    let mut solver = Apdagd::new(p, lipschitz0, opts.fidelity)?;
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
