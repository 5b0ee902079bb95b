//! Options, results and trace recording shared by the iterative solvers.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::feasibility::rounded_cost;
use crate::types::{DualPoint, Problem, Residuals, TraceRecord, TransportPlan};

/// Selects between the pseudocode as printed and the corrected recursions.
///
/// `Printed` reproduces the listed step-coefficient equations, primed-sequence
/// updates and accumulator order literally; several of these stall or diverge.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fidelity {
    #[default]
    Corrected,
    Printed,
}

impl std::str::FromStr for Fidelity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "corrected" => Ok(Self::Corrected),
            "printed" => Ok(Self::Printed),
            other => Err(format!("unknown fidelity '{other}' (expected printed|corrected)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub max_iter: usize,
    pub fidelity: Fidelity,
    /// Record every `trace_every`-th iteration plus the last one; 0 disables tracing.
    pub trace_every: usize,
    /// Stop (not converged) once this much wall time has passed.
    pub time_budget: Option<Duration>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 100_000,
            fidelity: Fidelity::Corrected,
            trace_every: 1,
            time_budget: None,
        }
    }
}

impl SolverOptions {
    pub fn with_max_iter(max_iter: usize) -> Self {
        Self {
            max_iter,
            ..Self::default()
        }
    }

    pub fn fidelity(mut self, fidelity: Fidelity) -> Self {
        self.fidelity = fidelity;
        self
    }

    pub fn trace_every(mut self, every: usize) -> Self {
        self.trace_every = every;
        self
    }
}

/// Outcome of an iterative solver. Exhausting `max_iter` is not an error:
/// `converged` is false and the partial trace is kept.
#[derive(Debug, Clone)]
pub struct SolveResult {
    /// The solver's primal output (averaged for the accelerated methods), unrounded.
    pub plan: TransportPlan,
    pub dual: DualPoint,
    pub trace: Vec<TraceRecord>,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) struct Recorder {
    start: Instant,
    every: usize,
    budget: Option<Duration>,
    pub records: Vec<TraceRecord>,
}

pub(crate) struct Snapshot<'a> {
    pub primal_f: f64,
    pub dual_phi: f64,
    pub residuals: Residuals,
    pub sparsity: f64,
    pub plan: &'a TransportPlan,
}

impl Recorder {
    pub fn new(opts: &SolverOptions) -> Self {
        Self {
            start: Instant::now(),
            every: opts.trace_every,
            budget: opts.time_budget,
            records: Vec::new(),
        }
    }

    pub fn wants(&self, iter: usize, last: bool) -> bool {
        self.every > 0 && (last || iter.is_multiple_of(self.every))
    }

    pub fn out_of_time(&self) -> bool {
        self.budget.is_some_and(|b| self.start.elapsed() >= b)
    }

    pub fn record(&mut self, p: &Problem, iter: usize, snap: Snapshot<'_>) {
        let unregularised_cost =
            rounded_cost(snap.plan, &p.a, &p.b, &p.cost).expect("plan matches problem");
        self.records.push(TraceRecord {
            iter,
            elapsed: self.start.elapsed().as_secs_f64(),
            primal_f: snap.primal_f,
            dual_phi: snap.dual_phi,
            gap: snap.primal_f - snap.dual_phi,
            residuals: snap.residuals,
            unregularised_cost,
            sparsity: snap.sparsity,
        });
    }
}

/// `(1 + slack)`-style tolerance for inequalities between objective values
/// that agree up to rounding.
pub(crate) fn value_slack(values: &[f64]) -> f64 {
    let scale = values.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    64.0 * f64::EPSILON * scale
}

/// The accelerated methods stop once the gap and the squared residual are both small.
pub(crate) fn accelerated_stop(gap: f64, residuals: &Residuals, eps: f64) -> bool {
    gap <= eps && residuals.l2_squared() <= eps * eps
}

pub(crate) const MAX_DOUBLINGS: usize = 60;
