//! Coordinate linear variance reduction: randomised dual averaging that
//! updates one dual block (λ or μ) per iteration.
//!
//! The primal iterate minimises a weighted sum of linearised Lagrangians plus
//! a proximal term around the uniform plan `X_0`:
//! `X_{k+1} = [α X_0 − q]₊ / (α + γ A_{k+1})`. The accumulator `q` collects
//! `a_{k+1}(z + C)` plus an extrapolation on `z = λ1ᵀ + 1μᵀ`, which only
//! ever changes by a rank-one term, so it is stored as its two factors.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dual::{evaluate_dual, plan_stats};
use crate::error::{Error, Result};
use crate::solver::{accelerated_stop, Fidelity, Recorder, Snapshot, SolveResult, SolverOptions};
use crate::types::{DualPoint, Problem, TransportPlan};

/// `a_{k+1} = ¼·√((1 + γA_k/α) / (n + m))`.
pub fn clvr_step_size(big_a: f64, alpha_reg: f64, gamma: f64, dim_sum: usize) -> f64 {
    0.25 * ((1.0 + gamma * big_a / alpha_reg) / dim_sum as f64).sqrt()
}

/// `a_0 = A_0 = 1 / (2√(n + m))`.
pub fn clvr_initial_step(dim_sum: usize) -> f64 {
    0.5 / (dim_sum as f64).sqrt()
}

#[derive(Debug, Clone)]
pub struct ClvrState {
    /// `a_k`.
    pub step: f64,
    /// `A_k`.
    pub step_sum: f64,
    pub alpha_reg: f64,
    /// Latest primal iterate `X_k`.
    pub plan: TransportPlan,
    /// Weighted average `X̃_k`.
    pub plan_avg: TransportPlan,
    /// Weight carried by `plan_avg`.
    pub avg_weight: f64,
    pub dual: DualPoint,
    pub previous_dual: DualPoint,
    /// Row factor of `z`.
    pub z_rows: Array1<f64>,
    /// Column factor of `z`.
    pub z_cols: Array1<f64>,
    /// Accumulator `q`.
    pub q: Array2<f64>,
    pub iter: usize,
}

impl ClvrState {
    /// `z` as a dense matrix `z_rows 1ᵀ + 1 z_colsᵀ`.
    pub fn z_matrix(&self) -> Array2<f64> {
        let (n, m) = (self.z_rows.len(), self.z_cols.len());
        Array2::from_shape_fn((n, m), |(i, j)| self.z_rows[i] + self.z_cols[j])
    }
}

#[derive(Debug, Clone)]
pub struct Clvr<'p> {
    problem: &'p Problem,
    fidelity: Fidelity,
    rng: ChaCha8Rng,
    x0: f64,
    state: ClvrState,
}

impl<'p> Clvr<'p> {
    pub fn new(problem: &'p Problem, alpha_reg: f64, seed: u64, fidelity: Fidelity) -> Result<Self> {
        if !(alpha_reg > 0.0 && alpha_reg.is_finite()) {
            return Err(Error::Instance(format!("alpha must be positive, got {alpha_reg}")));
        }
        let (n, m) = (problem.n(), problem.m());
        let a0 = clvr_initial_step(n + m);
        let x0 = 1.0 / (n * m) as f64;
        let uniform = TransportPlan::from_raw(Array2::from_elem((n, m), x0));
        Ok(Self {
            problem,
            fidelity,
            rng: ChaCha8Rng::seed_from_u64(seed),
            x0,
            state: ClvrState {
                step: a0,
                step_sum: a0,
                alpha_reg,
                plan: uniform.clone(),
                plan_avg: uniform,
                avg_weight: a0,
                dual: DualPoint::zeros(n, m),
                previous_dual: DualPoint::zeros(n, m),
                z_rows: Array1::zeros(n),
                z_cols: Array1::zeros(m),
                q: problem.cost.entries().mapv(|c| a0 * c),
                iter: 0,
            },
        })
    }

    pub fn state(&self) -> &ClvrState {
        &self.state
    }

    pub fn step(&mut self) {
        let p = self.problem;
        let (n, m) = (p.n(), p.m());
        let gamma = p.gamma;
        let s = &mut self.state;
        let alpha = s.alpha_reg;

        let next_step = clvr_step_size(s.step_sum, alpha, gamma, n + m);
        let next_sum = match self.fidelity {
            Fidelity::Corrected => s.step_sum + next_step,
            Fidelity::Printed => s.step_sum + s.step,
        };

        // Primal update, gathering marginals on the way.
        let denom = alpha + gamma * next_sum;
        let mut rows = Array1::<f64>::zeros(n);
        let mut cols = Array1::<f64>::zeros(m);
        let q = s.q.as_slice().expect("q is row-major");
        let plan = s.plan.as_slice_mut();
        for (i, (xrow, qrow)) in plan.chunks_exact_mut(m).zip(q.chunks_exact(m)).enumerate() {
            let mut r = 0.0;
            for ((x, qv), c) in xrow.iter_mut().zip(qrow).zip(cols.iter_mut()) {
                *x = (alpha * self.x0 - qv).max(0.0) / denom;
                r += *x;
                *c += *x;
            }
            rows[i] = r;
        }

        // Dual update on a random block.
        let dual_step = 2.0 * gamma * s.step;
        let pick_lambda = self.rng.random::<f64>() < 0.5;
        let mut next_dual = s.dual.clone();
        if pick_lambda {
            next_dual.lambda = &s.dual.lambda + &((&rows - &p.a.weights()) * dual_step);
        } else {
            next_dual.mu = &s.dual.mu + &((&cols - &p.b.weights()) * dual_step);
        }

        // Rank-one change of z.
        let (delta_rows, delta_cols) = match (self.fidelity, pick_lambda) {
            (Fidelity::Corrected, true) => (Some(&next_dual.lambda - &s.dual.lambda), None),
            (Fidelity::Corrected, false) => (None, Some(&next_dual.mu - &s.dual.mu)),
            (Fidelity::Printed, true) => (Some(&s.dual.lambda - &s.previous_dual.lambda), None),
            (Fidelity::Printed, false) => (None, Some(&s.dual.mu - &s.previous_dual.mu)),
        };
        if let Some(d) = &delta_rows {
            s.z_rows += d;
        }
        if let Some(d) = &delta_cols {
            s.z_cols += d;
        }

        // q += a_{k+1}(z + C) + 2a_k(z − z_prev).
        let extrapolation = 2.0 * s.step;
        let cost = p.cost.as_slice();
        let qm = s.q.as_slice_mut().expect("q is row-major");
        for (i, (qrow, crow)) in qm.chunks_exact_mut(m).zip(cost.chunks_exact(m)).enumerate() {
            let zr = s.z_rows[i];
            let dr = delta_rows.as_ref().map_or(0.0, |d| d[i]);
            for (j, (qv, c)) in qrow.iter_mut().zip(crow).enumerate() {
                let dc = delta_cols.as_ref().map_or(0.0, |d| d[j]);
                *qv += next_step * (zr + s.z_cols[j] + c) + extrapolation * (dr + dc);
            }
        }

        // Running average with weights a_i.
        let total = s.avg_weight + next_step;
        let (keep, take) = (s.avg_weight / total, next_step / total);
        for (avg, x) in s.plan_avg.as_slice_mut().iter_mut().zip(s.plan.as_slice()) {
            *avg = keep * *avg + take * x;
        }
        s.avg_weight = total;

        s.previous_dual = std::mem::replace(&mut s.dual, next_dual);
        s.step = next_step;
        s.step_sum = next_sum;
        s.iter += 1;
    }
}

/// Runs until the averaged plan meets the accelerated stopping test.
pub fn run_clvr(p: &Problem, eps: f64, alpha_reg: f64, seed: u64, opts: &SolverOptions) -> Result<SolveResult> {
    if !(eps > 0.0) {
        return Err(Error::Instance(format!("eps must be positive, got {eps}")));
    }
    let mut solver = Clvr::new(p, alpha_reg, seed, opts.fidelity)?;
    let mut recorder = Recorder::new(opts);
    let mut converged = false;
    for k in 1..=opts.max_iter {
        solver.step();
        let s = solver.state();
        if !s.dual.is_finite() {
            return Err(Error::Numerical(format!("dual iterate diverged at iteration {k}")));
        }
        let stats = plan_stats(p, &s.plan_avg);
        let dual_phi = evaluate_dual(p, &s.dual).value;
        converged = accelerated_stop(stats.primal_value - dual_phi, &stats.residuals, eps);
        let stop = converged || k == opts.max_iter || recorder.out_of_time();
        if recorder.wants(k, stop) {
            recorder.record(
                p,
                k,
                Snapshot {
                    primal_f: stats.primal_value,
                    dual_phi,
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
        dual: s.dual,
        trace: recorder.records,
        iterations: s.iter,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_size_examples() {
        let a1 = clvr_step_size(0.25, 1.0, 1.0, 4);
        // ¼·√(1.25 / 4)
        assert!((a1 - 0.139_754_248_593_736_85).abs() < 1e-15);
        let tiny_gamma = clvr_step_size(0.25, 1.0, 1e-300, 9);
        assert!((tiny_gamma - 0.5 * clvr_initial_step(9)).abs() < 1e-15);
    }

    #[test]
    fn step_size_increases_with_accumulated_sum() {
        let mut prev = 0.0;
        for k in 0..50 {
            let a = clvr_step_size(k as f64 * 0.3, 0.7, 0.2, 10);
            assert!(a > prev);
            prev = a;
        }
    }
}
