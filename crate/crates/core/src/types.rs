//! Domain types shared by every solver.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `Σ weights = 1` accepted by [`Measure::new`].
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Entries strictly below this value count as zeros when measuring sparsity.
pub const SPARSITY_THRESHOLD: f64 = 1e-21;

/// A probability vector on the unit simplex. Zero entries are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    weights: Array1<f64>,
}

impl Measure {
    pub fn new(weights: impl Into<Array1<f64>>) -> Result<Self> {
        let weights = weights.into();
        if weights.is_empty() {
            return Err(Error::Instance("measure has no atoms".into()));
        }
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !w.is_finite() || **w < 0.0) {
            return Err(Error::Instance(format!("measure weight {i} is {w}")));
        }
        let total: f64 = weights.sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Instance(format!("measure sums to {total}, expected 1")));
        }
        Ok(Self { weights })
    }

    /// Divides nonnegative `raw` by its sum.
    pub fn normalised(raw: impl Into<Array1<f64>>) -> Result<Self> {
        let raw = raw.into();
        if raw.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Instance("raw weights must be finite and nonnegative".into()));
        }
        let total: f64 = raw.sum();
        if total <= 0.0 {
            return Err(Error::Instance("zero total mass".into()));
        }
        Self::new(raw / total)
    }

    pub fn uniform(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::Instance("measure has no atoms".into()));
        }
        Self::new(Array1::from_elem(len, 1.0 / len as f64))
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> ArrayView1<'_, f64> {
        self.weights.view()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.weights.as_slice().expect("measure is contiguous")
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }
}

/// Nonnegative n×m cost matrix with its cached sup-norm.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    entries: Array2<f64>,
    sup_norm: f64,
}

impl CostMatrix {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Instance("cost matrix is empty".into()));
        }
        if entries.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::Instance("cost entries must be finite and nonnegative".into()));
        }
        let entries = entries.as_standard_layout().into_owned();
        let sup_norm = entries.iter().copied().fold(0.0, f64::max);
        Ok(Self { entries, sup_norm })
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    /// ‖C‖∞, the largest entry.
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn entries(&self) -> ArrayView2<'_, f64> {
        self.entries.view()
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        self.entries.as_slice().expect("cost matrix is row-major")
    }

    /// Rescales so that ‖C‖∞ = 1. An all-zero matrix is returned unchanged.
    pub fn normalised(&self) -> Self {
        if self.sup_norm == 0.0 {
            return self.clone();
        }
        Self {
            entries: &self.entries / self.sup_norm,
            sup_norm: 1.0,
        }
    }
}

/// A regularised instance `(a, b, C, γ)`.
#[derive(Debug, Clone)]
pub struct Problem {
    pub a: Measure,
    pub b: Measure,
    pub cost: CostMatrix,
    pub gamma: f64,
}

impl Problem {
    pub fn new(a: Measure, b: Measure, cost: CostMatrix, gamma: f64) -> Result<Self> {
        if cost.rows() != a.len() || cost.cols() != b.len() {
            return Err(Error::Dimension(format!(
                "cost is {}x{} but measures have lengths {} and {}",
                cost.rows(),
                cost.cols(),
                a.len(),
                b.len()
            )));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Instance(format!("gamma must be positive, got {gamma}")));
        }
        Ok(Self { a, b, cost, gamma })
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn m(&self) -> usize {
        self.b.len()
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), self.cost.clone(), gamma)
    }
}

/// Dual multipliers `(λ, μ)` for the row and column constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPoint {
    pub lambda: Array1<f64>,
    pub mu: Array1<f64>,
}

impl DualPoint {
    pub fn new(lambda: impl Into<Array1<f64>>, mu: impl Into<Array1<f64>>) -> Result<Self> {
        let (lambda, mu) = (lambda.into(), mu.into());
        if lambda.iter().chain(mu.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("dual point has non-finite entries".into()));
        }
        Ok(Self { lambda, mu })
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            lambda: Array1::zeros(n),
            mu: Array1::zeros(m),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.lambda.iter().chain(self.mu.iter()).all(|v| v.is_finite())
    }

    /// Euclidean norm of the stacked vector `(λ, μ)`.
    pub fn norm(&self) -> f64 {
        (self.lambda.dot(&self.lambda) + self.mu.dot(&self.mu)).sqrt()
    }

    /// `self + t·(other − self)`.
    pub fn lerp(&self, other: &DualPoint, t: f64) -> DualPoint {
        DualPoint {
            lambda: &self.lambda + &((&other.lambda - &self.lambda) * t),
            mu: &self.mu + &((&other.mu - &self.mu) * t),
        }
    }

    pub(crate) fn check_dims(&self, p: &Problem) -> Result<()> {
        if self.lambda.len() != p.n() || self.mu.len() != p.m() {
            return Err(Error::Dimension(format!(
                "dual point has lengths ({}, {}) but problem is {}x{}",
                self.lambda.len(),
                self.mu.len(),
                p.n(),
                p.m()
            )));
        }
        Ok(())
    }
}

/// A nonnegative n×m matrix of transported mass.
///
/// Plans recovered from arbitrary dual points may carry total mass above one;
/// [`TransportPlan::is_sub_probability`] checks the `≤ 1 + 1e-9` bound that
/// solver outputs satisfy.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    entries: Array2<f64>,
}

impl TransportPlan {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        if let Some(x) = entries.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::Instance(format!("plan entry {x} is negative or non-finite")));
        }
        Ok(Self {
            entries: entries.as_standard_layout().into_owned(),
        })
    }

    pub(crate) fn from_raw(entries: Array2<f64>) -> Self {
        debug_assert!(entries.is_standard_layout());
        Self { entries }
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            entries: Array2::zeros((n, m)),
        }
    }

    /// The independent coupling `a bᵀ`.
    pub fn product(a: &Measure, b: &Measure) -> Self {
        let (aw, bw) = (a.weights(), b.weights());
        Self {
            entries: Array2::from_shape_fn((aw.len(), bw.len()), |(i, j)| aw[i] * bw[j]),
        }
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> ArrayView2<'_, f64> {
        self.entries.view()
    }

    pub fn into_entries(self) -> Array2<f64> {
        self.entries
    }

    pub fn as_slice(&self) -> &[f64] {
        self.entries.as_slice().expect("plan is row-major")
    }

    pub(crate) fn as_slice_mut(&mut self) -> &mut [f64] {
        self.entries.as_slice_mut().expect("plan is row-major")
    }

    /// `X 1_m`.
    pub fn row_sums(&self) -> Array1<f64> {
        self.entries.sum_axis(Axis(1))
    }

    /// `Xᵀ 1_n`.
    pub fn col_sums(&self) -> Array1<f64> {
        self.entries.sum_axis(Axis(0))
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.sum()
    }

    pub fn is_sub_probability(&self) -> bool {
        self.total_mass() <= 1.0 + 1e-9
    }

    /// Fraction of entries strictly below [`SPARSITY_THRESHOLD`].
    pub fn sparsity(&self) -> f64 {
        let zeros = self.entries.iter().filter(|&&x| x < SPARSITY_THRESHOLD).count();
        zeros as f64 / self.entries.len() as f64
    }

    /// `⟨C, X⟩`.
    pub fn linear_cost(&self, cost: &CostMatrix) -> f64 {
        self.as_slice().iter().zip(cost.as_slice()).map(|(x, c)| x * c).sum()
    }

    /// Entrywise ℓ1 distance.
    pub fn l1_distance(&self, other: &TransportPlan) -> f64 {
        self.as_slice()
            .iter()
            .zip(other.as_slice())
            .map(|(x, y)| (x - y).abs())
            .sum()
    }

    pub(crate) fn check_dims(&self, n: usize, m: usize) -> Result<()> {
        if self.rows() != n || self.cols() != m {
            return Err(Error::Dimension(format!(
                "plan is {}x{} but expected {n}x{m}",
                self.rows(),
                self.cols()
            )));
        }
        Ok(())
    }
}

/// ℓ1 and ℓ2 norms of `X1 − a` and `Xᵀ1 − b`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub row_l1: f64,
    pub col_l1: f64,
    pub row_l2: f64,
    pub col_l2: f64,
}

impl Residuals {
    pub fn from_sums(row_sums: &[f64], a: &[f64], col_sums: &[f64], b: &[f64]) -> Self {
        let norms = |s: &[f64], t: &[f64]| {
            s.iter().zip(t).fold((0.0, 0.0), |(l1, l2), (x, y)| {
                let d = x - y;
                (l1 + d.abs(), l2 + d * d)
            })
        };
        let (row_l1, row_sq) = norms(row_sums, a);
        let (col_l1, col_sq) = norms(col_sums, b);
        Self {
            row_l1,
            col_l1,
            row_l2: row_sq.sqrt(),
            col_l2: col_sq.sqrt(),
        }
    }

    pub fn l1(&self) -> f64 {
        self.row_l1 + self.col_l1
    }

    /// `‖X1 − a‖₂² + ‖Xᵀ1 − b‖₂²`, the squared norm of `A[X] − B`.
    pub fn l2_squared(&self) -> f64 {
        self.row_l2 * self.row_l2 + self.col_l2 * self.col_l2
    }
}

/// Per-iteration convergence telemetry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    /// Wall-clock seconds since the solver started.
    pub elapsed: f64,
    /// Regularised primal objective of the solver's current plan.
    pub primal_f: f64,
    /// Dual objective of the solver's current dual point.
    pub dual_phi: f64,
    /// `primal_f − dual_phi`.
    pub gap: f64,
    pub residuals: Residuals,
    /// `⟨C, X⟩` after rounding the current plan onto the polytope.
    pub unregularised_cost: f64,
    /// Fraction of unrounded plan entries below [`SPARSITY_THRESHOLD`].
    pub sparsity: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn measure_rejects_bad_weights() {
        assert!(Measure::new(array![0.5, 0.6]).is_err());
        assert!(Measure::new(array![1.5, -0.5]).is_err());
        assert!(Measure::new(Array1::<f64>::zeros(0)).is_err());
        assert!(Measure::new(array![1.0, 0.0]).is_ok());
    }

    #[test]
    fn normalising_all_zero_fails() {
        let err = Measure::normalised(array![0.0, 0.0]).unwrap_err();
        assert!(err.to_string().contains("zero total mass"));
    }

    #[test]
    fn cost_sup_norm_is_max_entry() {
        let c = CostMatrix::new(array![[0.0, 3.0], [2.5, 1.0]]).unwrap();
        assert_eq!(c.sup_norm(), 3.0);
        assert_eq!(c.normalised().sup_norm(), 1.0);
        assert!(CostMatrix::new(array![[-1.0]]).is_err());
    }

    #[test]
    fn problem_checks_shapes_and_gamma() {
        let a = Measure::uniform(2).unwrap();
        let b = Measure::uniform(3).unwrap();
        let c = CostMatrix::new(Array2::zeros((2, 2))).unwrap();
        assert!(matches!(Problem::new(a.clone(), b.clone(), c, 1.0), Err(Error::Dimension(_))));
        let c = CostMatrix::new(Array2::zeros((2, 3))).unwrap();
        assert!(matches!(Problem::new(a, b, c, 0.0), Err(Error::Instance(_))));
    }

    #[test]
    fn residual_l2_never_exceeds_l1() {
        let r = Residuals::from_sums(&[0.2, 0.3], &[0.5, 0.5], &[0.1], &[1.0]);
        assert!((r.row_l1 - 0.5).abs() < 1e-15);
        assert!(r.row_l2 <= r.row_l1 && r.col_l2 <= r.col_l1);
    }

    #[test]
    fn product_plan_has_the_measures_as_marginals() {
        let a = Measure::new(array![0.25, 0.75]).unwrap();
        let b = Measure::new(array![0.5, 0.25, 0.25]).unwrap();
        let x = TransportPlan::product(&a, &b);
        assert!((x.row_sums() - a.weights()).iter().all(|d| d.abs() < 1e-15));
        assert!((x.col_sums() - b.weights()).iter().all(|d| d.abs() < 1e-15));
    }
}
