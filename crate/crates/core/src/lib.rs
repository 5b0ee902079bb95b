//! Euclidean-regularised discrete optimal transport.
//!
//! The regularised problem is
//!
//! ```text
//! min_{X 1 = a, Xᵀ1 = b, X ≥ 0}  ⟨C, X⟩ + (γ/2)·Σ x_ij²
//! ```
//!
//! and every solver in this crate works on its concave dual
//!
//! ```text
//! φ(λ, μ) = −(1/2γ)·Σ_ij [−c_ij − λ_i − μ_j]₊² − λᵀa − μᵀb
//! ```
//!
//! whose maximiser gives the plan `X(λ, μ) = [−C − λ1ᵀ − 1μᵀ]₊ / γ` in closed form.
//!
//! Solvers:
//! - [`sinkhorn`]: exact alternating block maximisation (Euclidean Sinkhorn–Knopp).
//! - [`apdagd`]: adaptive primal-dual accelerated gradient ascent.
//! - [`aam`]: primal-dual accelerated alternating maximisation.
//! - [`clvr`]: randomised coordinate linear variance reduction.
//! - [`entropic`]: classic log-domain entropic Sinkhorn, kept as a baseline.
//!
//! [`pipeline::approx_ot`] wraps them into ε-accurate solvers for the
//! unregularised problem by choosing γ, solving, and rounding onto the
//! transportation polytope. [`oracle`] holds slow independent references.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aam;
pub mod apdagd;
pub mod bounds;
pub mod clvr;
pub mod dual;
pub mod entropic;
mod error;
pub mod feasibility;
pub mod oracle;
pub mod pipeline;
pub mod sinkhorn;
pub mod solver;
pub mod threshold;
pub mod types;

pub use bounds::{lemma1_radius, operator_norm};
pub use dual::{dual_gradient, dual_objective, primal_objective, recover_plan};
pub use error::{Error, Result};
pub use feasibility::{marginal_residuals, round_to_polytope, rounded_cost};
pub use pipeline::{approx_ot, Method, PipelineConfig, PipelineOutput};
pub use solver::{Fidelity, SolveResult, SolverOptions};
pub use threshold::{threshold_solve, update_lambda, update_mu, ThresholdResult};
pub use types::{
    CostMatrix, DualPoint, Measure, Problem, Residuals, TraceRecord, TransportPlan,
    SPARSITY_THRESHOLD,
};
