//! ε-accurate transport for the unregularised problem: pick γ and the inner
//! tolerance for the method, solve, then round onto `U(a, b)`.
//!
//! | method            | γ          | inner stopping test              |
//! |-------------------|------------|----------------------------------|
//! | euclid-sinkhorn   | ε/2        | marginal ℓ1 ≤ ε/(4‖C‖∞)          |
//! | apdagd, aam, clvr | ε/3        | gap ≤ ε/3 and residual² ≤ (ε/3)² |
//! | entropy-sinkhorn  | ε/(4 ln N) | marginal ℓ1 ≤ ε/(8‖C‖∞)          |

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::aam::run_aam;
use crate::apdagd::run_apdagd;
use crate::clvr::run_clvr;
use crate::entropic::entropy_sinkhorn;
use crate::error::{Error, Result};
use crate::feasibility::round_to_polytope;
use crate::sinkhorn::run_euclidean_sinkhorn;
use crate::solver::{Fidelity, SolverOptions};
use crate::types::{CostMatrix, DualPoint, Measure, Problem, TraceRecord, TransportPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    EuclidSinkhorn,
    Apdagd,
    Aam,
    Clvr,
    EntropySinkhorn,
}

impl Method {
    pub const EUCLIDEAN: [Method; 4] = [Method::EuclidSinkhorn, Method::Apdagd, Method::Aam, Method::Clvr];

    pub fn name(self) -> &'static str {
        match self {
            Method::EuclidSinkhorn => "euclid-sinkhorn",
            Method::Apdagd => "apdagd",
            Method::Aam => "aam",
            Method::Clvr => "clvr",
            Method::EntropySinkhorn => "entropy-sinkhorn",
        }
    }

    pub fn is_randomised(self) -> bool {
        self == Method::Clvr
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        [Method::EuclidSinkhorn, Method::Apdagd, Method::Aam, Method::Clvr, Method::EntropySinkhorn]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method '{s}'"))
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub method: Method,
    /// Target accuracy on `⟨C, X⟩`, in absolute cost units.
    pub epsilon: f64,
    /// Seed for the randomised method.
    pub seed: u64,
    pub max_iter: usize,
    pub time_budget: Option<Duration>,
    pub fidelity: Fidelity,
    pub trace_every: usize,
    /// Initial smoothness estimate for the accelerated methods.
    pub lipschitz0: f64,
    /// Proximal weight for CLVR; defaults to γ.
    pub alpha_reg: Option<f64>,
}

impl PipelineConfig {
    pub fn new(method: Method, epsilon: f64) -> Self {
        Self {
            method,
            epsilon,
            seed: 0,
            max_iter: 100_000,
            time_budget: None,
            fidelity: Fidelity::Corrected,
            trace_every: 1,
            lipschitz0: 1.0,
            alpha_reg: None,
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn trace_every(mut self, every: usize) -> Self {
        self.trace_every = every;
        self
    }

    pub fn fidelity(mut self, fidelity: Fidelity) -> Self {
        self.fidelity = fidelity;
        self
    }

    fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            max_iter: self.max_iter,
            fidelity: self.fidelity,
            trace_every: self.trace_every,
            time_budget: self.time_budget,
        }
    }
}

/// Regulariser γ and inner tolerance for a method at accuracy ε.
pub fn regularisation(method: Method, epsilon: f64, cost: &CostMatrix) -> (f64, f64) {
    let scale = if cost.sup_norm() > 0.0 { cost.sup_norm() } else { 1.0 };
    match method {
        Method::EuclidSinkhorn => (epsilon / 2.0, epsilon / (4.0 * scale)),
        Method::Apdagd | Method::Aam | Method::Clvr => (epsilon / 3.0, epsilon / 3.0),
        Method::EntropySinkhorn => {
            let atoms = cost.rows().max(cost.cols()) as f64;
            (epsilon / (4.0 * atoms.ln().max(1.0)), epsilon / (8.0 * scale))
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// Rounded plan with exact marginals.
    pub plan: TransportPlan,
    /// The inner solver's plan before rounding.
    pub solver_plan: TransportPlan,
    /// Final dual point (absent for the entropic baseline).
    pub dual: Option<DualPoint>,
    pub trace: Vec<TraceRecord>,
    pub iterations: usize,
    pub converged: bool,
    pub gamma: f64,
    pub inner_tolerance: f64,
    /// `⟨C, plan⟩`.
    pub cost: f64,
    /// Sparsity of `solver_plan`.
    pub sparsity: f64,
}

/// Regularise, solve and round.
pub fn approx_ot(a: &Measure, b: &Measure, cost: &CostMatrix, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    if !(cfg.epsilon > 0.0 && cfg.epsilon.is_finite()) {
        return Err(Error::Instance(format!("epsilon must be positive, got {}", cfg.epsilon)));
    }
    let (gamma, tol) = regularisation(cfg.method, cfg.epsilon, cost);
    let opts = cfg.solver_options();
    let (solver_plan, dual, trace, iterations, converged) = if cfg.method == Method::EntropySinkhorn {
        let r = entropy_sinkhorn(a, b, cost, gamma, tol, true, &opts)?;
        (r.plan, None, r.trace, r.iterations, r.converged)
    } else {
        let p = Problem::new(a.clone(), b.clone(), cost.clone(), gamma)?;
        let r = match cfg.method {
            Method::EuclidSinkhorn => run_euclidean_sinkhorn(&p, tol, &opts)?,
            Method::Apdagd => run_apdagd(&p, tol, cfg.lipschitz0, &opts)?,
            Method::Aam => run_aam(&p, tol, cfg.lipschitz0, &opts)?,
            Method::Clvr => run_clvr(&p, tol, cfg.alpha_reg.unwrap_or(gamma), cfg.seed, &opts)?,
            Method::EntropySinkhorn => unreachable!(),
        };
        (r.plan, Some(r.dual), r.trace, r.iterations, r.converged)
    };
    let plan = round_to_polytope(&solver_plan, a, b)?;
    Ok(PipelineOutput {
        cost: plan.linear_cost(cost),
        sparsity: solver_plan.sparsity(),
        plan,
        solver_plan,
        dual,
        trace,
        iterations,
        converged,
        gamma,
        inner_tolerance: tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasibility::marginal_residuals;
    use ndarray::array;

    #[test]
    fn method_names_round_trip() {
        for m in [Method::EuclidSinkhorn, Method::Apdagd, Method::Aam, Method::Clvr, Method::EntropySinkhorn] {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("pdaam-ls".parse::<Method>().is_err());
    }

    #[test]
    fn regularisation_per_method() {
        let c = CostMatrix::new(array![[0.0, 2.0], [2.0, 0.0]]).unwrap();
        assert_eq!(regularisation(Method::EuclidSinkhorn, 0.1, &c), (0.05, 0.1 / 8.0));
        assert_eq!(regularisation(Method::Aam, 0.3, &c), (0.3 / 3.0, 0.3 / 3.0));
    }

    #[test]
    fn swap_instance() {
        let h = Measure::uniform(2).unwrap();
        let c = CostMatrix::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        for method in Method::EUCLIDEAN {
            let out = approx_ot(&h, &h, &c, &PipelineConfig::new(method, 0.1).max_iter(20_000)).unwrap();
            assert!(out.converged, "{method} did not converge");
            assert!(out.cost >= 0.0 && out.cost <= 0.1, "{method}: cost {}", out.cost);
            assert!(marginal_residuals(&out.plan, &h, &h).unwrap().l1() < 1e-12);
        }
        // Exact block steps land on the regularised optimum, which is diagonal here.
        let out = approx_ot(&h, &h, &c, &PipelineConfig::new(Method::EuclidSinkhorn, 0.1)).unwrap();
        assert_eq!(out.cost, 0.0);
        assert_eq!(out.plan.entries()[[0, 0]], 0.5);
    }
}
