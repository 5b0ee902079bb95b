//! Classic entropic Sinkhorn scaling, kept as a comparison baseline.
//!
//! Works on the kernel `exp(−C/γ)`. The log-domain variant carries potentials
//! `(f, g)` with `X = exp((f ⊕ g − C)/γ)` and survives tiny γ; the plain
//! variant multiplies scalings directly and fails once the kernel underflows.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::feasibility::rounded_cost;
use crate::solver::SolverOptions;
use crate::types::{CostMatrix, Measure, Residuals, TraceRecord, TransportPlan, SPARSITY_THRESHOLD};

#[derive(Debug, Clone)]
pub struct EntropicResult {
    pub plan: TransportPlan,
    pub trace: Vec<TraceRecord>,
    pub iterations: usize,
    pub converged: bool,
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone, gamma: f64) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = values.map(|v| ((v - max) / gamma).exp()).sum();
    max + gamma * s.ln()
}

struct Telemetry {
    plan: TransportPlan,
    entropic_primal: f64,
    residuals: Residuals,
    sparsity: f64,
}

fn telemetry(plan: TransportPlan, a: &Measure, b: &Measure, cost: &CostMatrix, gamma: f64) -> Telemetry {
    let (mut lin, mut ent, mut zeros) = (0.0, 0.0, 0usize);
    for (x, c) in plan.as_slice().iter().zip(cost.as_slice()) {
        lin += c * x;
        if *x > 0.0 {
            ent += x * (x.ln() - 1.0);
        }
        if *x < SPARSITY_THRESHOLD {
            zeros += 1;
        }
    }
    let rows = plan.row_sums();
    let cols = plan.col_sums();
    let residuals = Residuals::from_sums(rows.as_slice().unwrap(), a.as_slice(), cols.as_slice().unwrap(), b.as_slice());
    let sparsity = zeros as f64 / plan.as_slice().len() as f64;
    Telemetry {
        plan,
        entropic_primal: lin + gamma * ent,
        residuals,
        sparsity,
    }
}

/// Alternating row/column scaling until `‖X1 − a‖₁ + ‖Xᵀ1 − b‖₁ ≤ eps_marginal`.
///
/// Trace `primal_f`/`dual_phi` are the entropic objectives
/// `⟨C, X⟩ + γΣx(ln x − 1)` and `fᵀa + gᵀb − γΣX`.
pub fn entropy_sinkhorn(
    a: &Measure,
    b: &Measure,
    cost: &CostMatrix,
    gamma: f64,
    eps_marginal: f64,
    log_domain: bool,
    opts: &SolverOptions,
) -> Result<EntropicResult> {
    let (n, m) = (a.len(), b.len());
    if cost.rows() != n || cost.cols() != m {
        return Err(Error::Dimension("cost does not match the measures".into()));
    }
    if !(gamma > 0.0) || !(eps_marginal > 0.0) {
        return Err(Error::Instance("gamma and eps_marginal must be positive".into()));
    }
    let start = std::time::Instant::now();
    let c = cost.as_slice();
    let (aw, bw) = (a.as_slice(), b.as_slice());
    let log_a: Vec<f64> = aw.iter().map(|x| x.ln()).collect();
    let log_b: Vec<f64> = bw.iter().map(|x| x.ln()).collect();
    let mut f = Array1::<f64>::zeros(n);
    let mut g = Array1::<f64>::zeros(m);
    let kernel: Vec<f64> = if log_domain { Vec::new() } else { c.iter().map(|c| (-c / gamma).exp()).collect() };
    let mut u = vec![1.0; n];
    let mut v = vec![1.0; m];

    let mut trace = Vec::new();
    for k in 1..=opts.max_iter {
        let rows_turn = k % 2 == 1;
        if log_domain {
            if rows_turn {
                for i in 0..n {
                    let row = &c[i * m..(i + 1) * m];
                    let lse = log_sum_exp(g.iter().zip(row).map(|(gj, cij)| gj - cij), gamma);
                    f[i] = gamma * log_a[i] - lse;
                }
            } else {
                for j in 0..m {
                    let lse = log_sum_exp(f.iter().enumerate().map(|(i, fi)| fi - c[i * m + j]), gamma);
                    g[j] = gamma * log_b[j] - lse;
                }
            }
        } else if rows_turn {
            for i in 0..n {
                let kv: f64 = kernel[i * m..(i + 1) * m].iter().zip(&v).map(|(k, v)| k * v).sum();
                u[i] = aw[i] / kv;
            }
        } else {
            for j in 0..m {
                let ku: f64 = (0..n).map(|i| kernel[i * m + j] * u[i]).sum();
                v[j] = bw[j] / ku;
            }
        }
        if !log_domain && u.iter().chain(&v).any(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!(
                "scaling overflowed at iteration {k}: exp(-C/gamma) underflows for gamma = {gamma}"
            )));
        }

        let mut x = TransportPlan::zeros(n, m);
        {
            let xs = x.as_slice_mut();
            for i in 0..n {
                for j in 0..m {
                    let idx = i * m + j;
                    xs[idx] = if log_domain {
                        let e = f[i] + g[j] - c[idx];
                        if e == f64::NEG_INFINITY { 0.0 } else { (e / gamma).exp() }
                    } else {
                        u[i] * kernel[idx] * v[j]
                    };
                }
            }
        }
        let t = telemetry(x, a, b, cost, gamma);
        let converged = t.residuals.l1() <= eps_marginal;
        let stop = converged || k == opts.max_iter || opts.time_budget.is_some_and(|bud| start.elapsed() >= bud);
        if opts.trace_every > 0 && (stop || k % opts.trace_every == 0) {
            let (fv, gv): (Array1<f64>, Array1<f64>) = if log_domain {
                (f.clone(), g.clone())
            } else {
                (
                    u.iter().map(|x| gamma * x.ln()).collect(),
                    v.iter().map(|x| gamma * x.ln()).collect(),
                )
            };
            // Zero-mass atoms carry −∞ potentials and contribute nothing.
            let lin = |p: &Array1<f64>, w: &[f64]| -> f64 {
                p.iter().zip(w).filter(|(_, w)| **w > 0.0).map(|(p, w)| p * w).sum()
            };
            let dual_phi = lin(&fv, aw) + lin(&gv, bw) - gamma * t.plan.total_mass();
            trace.push(TraceRecord {
                iter: k,
                elapsed: start.elapsed().as_secs_f64(),
                primal_f: t.entropic_primal,
                dual_phi,
                gap: t.entropic_primal - dual_phi,
                residuals: t.residuals,
                unregularised_cost: rounded_cost(&t.plan, a, b, cost)?,
                sparsity: t.sparsity,
            });
        }
        if stop {
            return Ok(EntropicResult {
                plan: t.plan,
                trace,
                iterations: k,
                converged,
            });
        }
    }
    Err(Error::Instance("max_iter must be at least 1".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_cost_gives_the_independent_coupling() {
        let a = Measure::new(array![0.2, 0.3, 0.5]).unwrap();
        let b = Measure::new(array![0.6, 0.4]).unwrap();
        let c = CostMatrix::new(Array2::zeros((3, 2))).unwrap();
        for log_domain in [true, false] {
            let r = entropy_sinkhorn(&a, &b, &c, 0.1, 1e-12, log_domain, &SolverOptions::with_max_iter(10)).unwrap();
            assert!(r.converged && r.iterations <= 2);
            let expected = TransportPlan::product(&a, &b);
            assert!(r.plan.l1_distance(&expected) < 1e-14);
        }
    }

    #[test]
    fn random_instance_reaches_marginal_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = Measure::normalised(Array1::from_shape_fn(5, |_| rng.random::<f64>() + 0.1)).unwrap();
        let b = Measure::normalised(Array1::from_shape_fn(5, |_| rng.random::<f64>() + 0.1)).unwrap();
        let c = CostMatrix::new(Array2::from_shape_fn((5, 5), |_| rng.random::<f64>())).unwrap();
        let r = entropy_sinkhorn(&a, &b, &c, 0.1, 1e-8, true, &SolverOptions::with_max_iter(10_000)).unwrap();
        assert!(r.converged);
        assert!(r.trace.last().unwrap().residuals.l1() <= 1e-8);
        assert!(r.trace.last().unwrap().gap.abs() < 1e-6);
    }

    #[test]
    fn tiny_gamma_overflows_without_log_domain() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = Measure::uniform(5).unwrap();
        let c = CostMatrix::new(Array2::from_shape_fn((5, 5), |_| 0.1 + rng.random::<f64>())).unwrap();
        let err = entropy_sinkhorn(&a, &a, &c, 1e-6, 1e-6, false, &SolverOptions::with_max_iter(100)).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
        let ok = entropy_sinkhorn(&a, &a, &c, 1e-6, 1e-6, true, &SolverOptions::with_max_iter(50)).unwrap();
        assert!(ok.plan.as_slice().iter().all(|x| x.is_finite()));
    }
}
