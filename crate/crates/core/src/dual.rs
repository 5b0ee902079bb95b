//! Primal and dual objectives, the closed-form plan `X(λ, μ)` and the dual gradient.
//!
//! The gradient follows the true derivative of the concave dual,
//! `∇_λ φ = X(λ, μ)1 − a` and `∇_μ φ = X(λ, μ)ᵀ1 − b`, so ascent steps
//! `λ ← λ + α∇_λ φ` increase φ for small α.

use ndarray::Array1;

use crate::error::Result;
use crate::types::{DualPoint, Problem, Residuals, TransportPlan, SPARSITY_THRESHOLD};

/// Everything one pass over the implicit plan `X(λ, μ)` yields.
#[derive(Debug, Clone)]
pub struct DualEval {
    /// φ(λ, μ).
    pub value: f64,
    /// `X(λ, μ) 1_m`.
    pub row_sums: Array1<f64>,
    /// `X(λ, μ)ᵀ 1_n`.
    pub col_sums: Array1<f64>,
    /// `⟨C, X(λ, μ)⟩`.
    pub linear_cost: f64,
    /// `Σ x_ij²`.
    pub sq_norm: f64,
    /// Number of entries below the sparsity threshold.
    pub zeros: usize,
}

impl DualEval {
    pub fn gradient(&self, p: &Problem) -> (Array1<f64>, Array1<f64>) {
        (&self.row_sums - &p.a.weights(), &self.col_sums - &p.b.weights())
    }

    /// Squared Euclidean norm of the full gradient.
    pub fn gradient_sq_norm(&self, p: &Problem) -> f64 {
        self.residuals(p).l2_squared()
    }

    /// `f(X(λ, μ))`.
    pub fn primal_value(&self, gamma: f64) -> f64 {
        self.linear_cost + 0.5 * gamma * self.sq_norm
    }

    pub fn residuals(&self, p: &Problem) -> Residuals {
        Residuals::from_sums(
            self.row_sums.as_slice().unwrap(),
            p.a.as_slice(),
            self.col_sums.as_slice().unwrap(),
            p.b.as_slice(),
        )
    }

    pub fn sparsity(&self, p: &Problem) -> f64 {
        self.zeros as f64 / (p.n() * p.m()) as f64
    }
}

pub(crate) fn linear_terms(p: &Problem, d: &DualPoint) -> f64 {
    d.lambda.dot(&p.a.weights()) + d.mu.dot(&p.b.weights())
}

/// Single pass over `X(λ, μ)` without materialising it. Dimensions are
/// assumed checked.
pub fn evaluate_dual(p: &Problem, d: &DualPoint) -> DualEval {
    let (n, m) = (p.n(), p.m());
    let gamma = p.gamma;
    let cost = p.cost.as_slice();
    let mu = d.mu.as_slice().expect("contiguous mu");
    let mut row_sums = Array1::zeros(n);
    let mut col_sums = vec![0.0; m];
    let (mut linear_cost, mut clipped_sq, mut zeros) = (0.0, 0.0, 0usize);
    for (i, (crow, rs)) in cost.chunks_exact(m).zip(row_sums.iter_mut()).enumerate() {
        let li = d.lambda[i];
        let mut row = 0.0;
        for ((c, mj), cs) in crow.iter().zip(mu).zip(col_sums.iter_mut()) {
            let s = -c - li - mj;
            if s > 0.0 {
                let x = s / gamma;
                row += x;
                *cs += x;
                linear_cost += c * x;
                clipped_sq += s * s;
                if x < SPARSITY_THRESHOLD {
                    zeros += 1;
                }
            } else {
                zeros += 1;
            }
        }
        *rs = row;
    }
    let value = -clipped_sq / (2.0 * gamma) - linear_terms(p, d);
    DualEval {
        value,
        row_sums,
        col_sums: Array1::from(col_sums),
        linear_cost,
        sq_norm: clipped_sq / (gamma * gamma),
        zeros,
    }
}

/// `target ← keep·target + weight·X(λ, μ)`, entrywise.
pub(crate) fn blend_plan(p: &Problem, d: &DualPoint, keep: f64, weight: f64, target: &mut [f64]) {
    let m = p.m();
    let mu = d.mu.as_slice().expect("contiguous mu");
    for (i, (crow, trow)) in p.cost.as_slice().chunks_exact(m).zip(target.chunks_exact_mut(m)).enumerate() {
        let li = d.lambda[i];
        for ((c, mj), t) in crow.iter().zip(mu).zip(trow.iter_mut()) {
            let x = (-c - li - mj).max(0.0) / p.gamma;
            *t = keep * *t + weight * x;
        }
    }
}

/// Summary of an explicit plan against a problem.
#[derive(Debug, Clone)]
pub struct PlanStats {
    pub primal_value: f64,
    pub linear_cost: f64,
    pub residuals: Residuals,
    pub sparsity: f64,
}

pub fn plan_stats(p: &Problem, x: &TransportPlan) -> PlanStats {
    let m = p.m();
    let mut rows = vec![0.0; p.n()];
    let mut cols = vec![0.0; m];
    let (mut linear_cost, mut sq, mut zeros) = (0.0, 0.0, 0usize);
    for ((xrow, crow), rs) in x
        .as_slice()
        .chunks_exact(m)
        .zip(p.cost.as_slice().chunks_exact(m))
        .zip(rows.iter_mut())
    {
        for ((x, c), cs) in xrow.iter().zip(crow).zip(cols.iter_mut()) {
            *rs += x;
            *cs += x;
            linear_cost += c * x;
            sq += x * x;
            if *x < SPARSITY_THRESHOLD {
                zeros += 1;
            }
        }
    }
    PlanStats {
        primal_value: linear_cost + 0.5 * p.gamma * sq,
        linear_cost,
        residuals: Residuals::from_sums(&rows, p.a.as_slice(), &cols, p.b.as_slice()),
        sparsity: zeros as f64 / (p.n() * m) as f64,
    }
}

/// [`blend_plan`] followed by [`plan_stats`] of the blended plan, in one pass.
pub(crate) fn blend_plan_stats(p: &Problem, d: &DualPoint, keep: f64, weight: f64, target: &mut [f64]) -> PlanStats {
    let m = p.m();
    let mu = d.mu.as_slice().expect("contiguous mu");
    let mut rows = vec![0.0; p.n()];
    let mut cols = vec![0.0; m];
    let (mut linear_cost, mut sq, mut zeros) = (0.0, 0.0, 0usize);
    for (i, ((crow, trow), rs)) in p
        .cost
        .as_slice()
        .chunks_exact(m)
        .zip(target.chunks_exact_mut(m))
        .zip(rows.iter_mut())
        .enumerate()
    {
        let li = d.lambda[i];
        for (((c, mj), t), cs) in crow.iter().zip(mu).zip(trow.iter_mut()).zip(cols.iter_mut()) {
            let x = (-c - li - mj).max(0.0) / p.gamma;
            let t_new = keep * *t + weight * x;
            *t = t_new;
            *rs += t_new;
            *cs += t_new;
            linear_cost += c * t_new;
            sq += t_new * t_new;
            if t_new < SPARSITY_THRESHOLD {
                zeros += 1;
            }
        }
    }
    PlanStats {
        primal_value: linear_cost + 0.5 * p.gamma * sq,
        linear_cost,
        residuals: Residuals::from_sums(&rows, p.a.as_slice(), &cols, p.b.as_slice()),
        sparsity: zeros as f64 / (p.n() * m) as f64,
    }
}

/// `f(X) = ⟨C, X⟩ + (γ/2)·Σ x_ij²`.
pub fn primal_objective(p: &Problem, x: &TransportPlan) -> Result<f64> {
    x.check_dims(p.n(), p.m())?;
    Ok(plan_stats(p, x).primal_value)
}

/// φ(λ, μ) = −(1/2γ)·Σ_j ‖[−C_j − λ − μ_j 1]₊‖² − λᵀa − μᵀb, with `C_j` the j-th column.
pub fn dual_objective(p: &Problem, d: &DualPoint) -> Result<f64> {
    d.check_dims(p)?;
    Ok(evaluate_dual(p, d).value)
}

/// `X(λ, μ) = [−C − λ1ᵀ − 1μᵀ]₊ / γ`.
pub fn recover_plan(p: &Problem, d: &DualPoint) -> Result<TransportPlan> {
    d.check_dims(p)?;
    let mut x = TransportPlan::zeros(p.n(), p.m());
    blend_plan(p, d, 0.0, 1.0, x.as_slice_mut());
    Ok(x)
}

/// `(∇_λ φ, ∇_μ φ) = (X1 − a, Xᵀ1 − b)`.
pub fn dual_gradient(p: &Problem, d: &DualPoint) -> Result<(Array1<f64>, Array1<f64>)> {
    d.check_dims(p)?;
    Ok(evaluate_dual(p, d).gradient(p))
}

/// `L(X, λ, μ) = f(X) + λᵀ(X1 − a) + μᵀ(Xᵀ1 − b)`.
pub fn lagrangian(p: &Problem, x: &TransportPlan, d: &DualPoint) -> Result<f64> {
    x.check_dims(p.n(), p.m())?;
    d.check_dims(p)?;
    let f = plan_stats(p, x).primal_value;
    let rows = x.row_sums() - p.a.weights();
    let cols = x.col_sums() - p.b.weights();
    Ok(f + d.lambda.dot(&rows) + d.mu.dot(&cols))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{CostMatrix, Measure};
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(rng: &mut ChaCha8Rng, n: usize, m: usize, gamma: f64) -> Problem {
        let a = Measure::normalised(Array1::from_shape_fn(n, |_| rng.random::<f64>() + 0.05)).unwrap();
        let b = Measure::normalised(Array1::from_shape_fn(m, |_| rng.random::<f64>() + 0.05)).unwrap();
        let c = CostMatrix::new(Array2::from_shape_fn((n, m), |_| rng.random::<f64>())).unwrap();
        Problem::new(a, b, c, gamma).unwrap()
    }

    fn random_dual(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DualPoint {
        DualPoint::new(
            Array1::from_shape_fn(n, |_| -rng.random::<f64>()),
            Array1::from_shape_fn(m, |_| -rng.random::<f64>()),
        )
        .unwrap()
    }

    #[test]
    fn primal_objective_examples() {
        let a = Measure::uniform(2).unwrap();
        let p = Problem::new(a.clone(), a.clone(), CostMatrix::new(Array2::zeros((2, 2))).unwrap(), 1.0).unwrap();
        let x = TransportPlan::new(Array2::from_elem((2, 2), 0.25)).unwrap();
        assert!((primal_objective(&p, &x).unwrap() - 0.125).abs() < 1e-15);

        let c = CostMatrix::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let p = Problem::new(a.clone(), a, c, 1.0).unwrap();
        let x = TransportPlan::new(array![[0.5, 0.0], [0.0, 0.5]]).unwrap();
        assert!((primal_objective(&p, &x).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn primal_objective_matches_elementwise_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_problem(&mut rng, 3, 3, 0.7);
        let x = TransportPlan::new(Array2::from_shape_fn((3, 3), |_| rng.random::<f64>() / 9.0)).unwrap();
        let mut expected = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let xij = x.entries()[[i, j]];
                expected += p.cost.entries()[[i, j]] * xij + 0.5 * 0.7 * xij * xij;
            }
        }
        assert!((primal_objective(&p, &x).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn dual_objective_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_problem(&mut rng, 3, 4, 0.3);
        assert_eq!(dual_objective(&p, &DualPoint::zeros(3, 4)).unwrap(), 0.0);

        let one = Measure::new(array![1.0]).unwrap();
        let p = Problem::new(one.clone(), one, CostMatrix::new(array![[0.0]]).unwrap(), 1.0).unwrap();
        let d = DualPoint::new(array![-1.0], array![-1.0]).unwrap();
        assert!(dual_objective(&p, &d).unwrap().abs() < 1e-15);
    }

    #[test]
    fn dual_objective_is_the_lagrangian_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let p = random_problem(&mut rng, 4, 3, 0.2);
            let d = random_dual(&mut rng, 4, 3);
            let x = recover_plan(&p, &d).unwrap();
            let l = lagrangian(&p, &x, &d).unwrap();
            assert!((l - dual_objective(&p, &d).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn recover_plan_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = random_problem(&mut rng, 3, 3, 0.5);
        assert_eq!(recover_plan(&p, &DualPoint::zeros(3, 3)).unwrap().total_mass(), 0.0);

        let gamma = 0.37;
        let a = Measure::uniform(2).unwrap();
        let p = Problem::new(a.clone(), a, CostMatrix::new(Array2::zeros((2, 2))).unwrap(), gamma).unwrap();
        let d = DualPoint::new(array![-gamma / 8.0, -gamma / 8.0], array![-gamma / 8.0, -gamma / 8.0]).unwrap();
        let x = recover_plan(&p, &d).unwrap();
        assert!(x.entries().iter().all(|v| (v - 0.25).abs() < 1e-15));
    }

    #[test]
    fn positive_entries_are_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_problem(&mut rng, 5, 4, 0.1);
        let d = random_dual(&mut rng, 5, 4);
        let x = recover_plan(&p, &d).unwrap();
        for i in 0..5 {
            for j in 0..4 {
                let xij = x.entries()[[i, j]];
                if xij > 0.0 {
                    let r = p.cost.entries()[[i, j]] + p.gamma * xij + d.lambda[i] + d.mu[j];
                    assert!(r.abs() < 1e-12, "stationarity residual {r}");
                }
            }
        }
    }

    #[test]
    fn gradient_examples() {
        let a = Measure::new(array![0.3, 0.7]).unwrap();
        let b = Measure::new(array![0.6, 0.4]).unwrap();
        let c = CostMatrix::new(array![[1.0, 2.0], [0.5, 0.1]]).unwrap();
        let p = Problem::new(a.clone(), b.clone(), c, 0.5).unwrap();
        let (gl, gm) = dual_gradient(&p, &DualPoint::zeros(2, 2)).unwrap();
        assert_eq!(gl, -&a.weights());
        assert_eq!(gm, -&b.weights());

        let u = Measure::uniform(2).unwrap();
        let p = Problem::new(u.clone(), u, CostMatrix::new(Array2::zeros((2, 2))).unwrap(), 2.0).unwrap();
        let d = DualPoint::new(array![-0.25, -0.25], array![-0.25, -0.25]).unwrap();
        let (gl, gm) = dual_gradient(&p, &d).unwrap();
        assert!(gl.iter().chain(gm.iter()).all(|g| g.abs() < 1e-15));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = random_problem(&mut rng, 3, 3, 0.5);
        assert!(dual_objective(&p, &DualPoint::zeros(2, 3)).is_err());
        assert!(primal_objective(&p, &TransportPlan::zeros(3, 2)).is_err());
    }

    #[test]
    fn fused_blend_matches_separate_passes() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let p = random_problem(&mut rng, 6, 4, 0.2);
        let d = random_dual(&mut rng, 6, 4);
        let start = TransportPlan::from_raw(Array2::from_shape_fn((6, 4), |_| rng.random::<f64>()));
        let mut separate = start.clone();
        blend_plan(&p, &d, 0.7, 0.3, separate.as_slice_mut());
        let expected = plan_stats(&p, &separate);
        let mut fused = start;
        let got = blend_plan_stats(&p, &d, 0.7, 0.3, fused.as_slice_mut());
        assert_eq!(fused, separate);
        assert_eq!(got.primal_value, expected.primal_value);
        assert_eq!(got.residuals, expected.residuals);
        assert_eq!(got.sparsity, expected.sparsity);
    }
}
