//! Closed-form quantities from the convergence analysis, used as test bounds.

use crate::types::Problem;

/// Radius `R = ‖C‖∞ + γ/min(n, m)·(1 − max_{i,j}{a_i, b_j})` bounding the spread
/// `max − min` of Sinkhorn iterates and of the optimal multipliers.
pub fn lemma1_radius(p: &Problem) -> f64 {
    let max_mass = p.a.max_weight().max(p.b.max_weight());
    p.cost.sup_norm() + p.gamma / p.n().min(p.m()) as f64 * (1.0 - max_mass)
}

/// `‖A‖₂,₂ = √(n + m)` for the stacked-marginals operator `A[X] = (X1, Xᵀ1)`.
pub fn operator_norm(n: usize, m: usize) -> f64 {
    ((n + m) as f64).sqrt()
}

/// Sufficient Euclidean Sinkhorn iteration count `2 + 8·max(n, m)^{3/2}·R/(γε)`.
pub fn sinkhorn_iteration_bound(p: &Problem, eps: f64) -> f64 {
    let big = p.n().max(p.m()) as f64;
    2.0 + 8.0 * big.powf(1.5) * lemma1_radius(p) / (p.gamma * eps)
}

/// Accelerated duality-gap bound `16(n + m)·R₂²/(γk²)` after `k ≥ 1` iterations,
/// with `R₂ ≥ ‖(λ*, μ*)‖₂`.
pub fn accelerated_gap_bound(n: usize, m: usize, r2: f64, gamma: f64, k: usize) -> f64 {
    16.0 * (n + m) as f64 * r2 * r2 / (gamma * (k * k) as f64)
}

/// Accelerated feasibility bound `‖A[X_k] − B‖₂ ≤ 16(n + m)·R₂/(γk²)`.
pub fn accelerated_residual_bound(n: usize, m: usize, r2: f64, gamma: f64, k: usize) -> f64 {
    16.0 * (n + m) as f64 * r2 / (gamma * (k * k) as f64)
}
