//! Marginal violations and rounding onto the transportation polytope `U(a, b)`.
//!
//! Rounding runs in three stages: shrink overfull rows, shrink overfull
//! columns, then spread the remaining deficit with a rank-one correction.
//! The output has marginals `a` and `b` and moves at most
//! `2(‖x1 − a‖₁ + ‖xᵀ1 − b‖₁)` mass in ℓ1.

use crate::error::{Error, Result};
use crate::types::{CostMatrix, Measure, Residuals, TransportPlan};

/// ℓ1 and ℓ2 norms of `X1 − a` and `Xᵀ1 − b`.
pub fn marginal_residuals(x: &TransportPlan, a: &Measure, b: &Measure) -> Result<Residuals> {
    x.check_dims(a.len(), b.len())?;
    let rows = x.row_sums();
    let cols = x.col_sums();
    Ok(Residuals::from_sums(
        rows.as_slice().unwrap(),
        a.as_slice(),
        cols.as_slice().unwrap(),
        b.as_slice(),
    ))
}

fn shrink_factor(target: f64, sum: f64) -> f64 {
    if sum > target {
        target / sum
    } else {
        1.0
    }
}

struct Scaling {
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    row_deficit: Vec<f64>,
    col_deficit: Vec<f64>,
    deficit_mass: f64,
}

fn scaling(x: &[f64], a: &[f64], b: &[f64]) -> Scaling {
    let m = b.len();
    let row_scale: Vec<f64> = x
        .chunks_exact(m)
        .zip(a)
        .map(|(row, &ai)| shrink_factor(ai, row.iter().sum()))
        .collect();
    let mut cols = vec![0.0; m];
    for (row, u) in x.chunks_exact(m).zip(&row_scale) {
        for (c, v) in cols.iter_mut().zip(row) {
            *c += u * v;
        }
    }
    let col_scale: Vec<f64> = cols.iter().zip(b).map(|(&c, &bj)| shrink_factor(bj, c)).collect();
    let row_deficit: Vec<f64> = x
        .chunks_exact(m)
        .zip(&row_scale)
        .zip(a)
        .map(|((row, u), ai)| {
            let s: f64 = row.iter().zip(&col_scale).map(|(x, v)| x * v).sum();
            (ai - u * s).max(0.0)
        })
        .collect();
    let col_deficit: Vec<f64> = cols
        .iter()
        .zip(&col_scale)
        .zip(b)
        .map(|((c, v), bj)| (bj - c * v).max(0.0))
        .collect();
    let deficit_mass = row_deficit.iter().sum();
    Scaling {
        row_scale,
        col_scale,
        row_deficit,
        col_deficit,
        deficit_mass,
    }
}

/// Projects a nonnegative plan onto `U(a, b)`.
///
/// Rows with zero mass keep a unit scale. Negative entries cannot reach this
/// function: [`TransportPlan::new`] rejects them with an instance error.
pub fn round_to_polytope(x: &TransportPlan, a: &Measure, b: &Measure) -> Result<TransportPlan> {
    x.check_dims(a.len(), b.len())?;
    let m = b.len();
    let s = scaling(x.as_slice(), a.as_slice(), b.as_slice());
    let mut out = x.clone();
    for (i, row) in out.as_slice_mut().chunks_exact_mut(m).enumerate() {
        let u = s.row_scale[i];
        let spread = if s.deficit_mass > 0.0 { s.row_deficit[i] / s.deficit_mass } else { 0.0 };
        for ((v, scale), dc) in row.iter_mut().zip(&s.col_scale).zip(&s.col_deficit) {
            *v = *v * u * scale + spread * dc;
        }
    }
    Ok(out)
}

/// `⟨C, round_to_polytope(x)⟩` without materialising the rounded plan.
pub fn rounded_cost(x: &TransportPlan, a: &Measure, b: &Measure, cost: &CostMatrix) -> Result<f64> {
    x.check_dims(a.len(), b.len())?;
    if cost.rows() != a.len() || cost.cols() != b.len() {
        return Err(Error::Dimension("cost does not match the measures".into()));
    }
    let m = b.len();
    let s = scaling(x.as_slice(), a.as_slice(), b.as_slice());
    let mut total = 0.0;
    for (i, (row, crow)) in x.as_slice().chunks_exact(m).zip(cost.as_slice().chunks_exact(m)).enumerate() {
        let u = s.row_scale[i];
        let dr = s.row_deficit[i];
        let mut scaled = 0.0;
        let mut spread = 0.0;
        for ((x, c), (v, dc)) in row.iter().zip(crow).zip(s.col_scale.iter().zip(&s.col_deficit)) {
            scaled += c * x * v;
            spread += c * dc;
        }
        total += u * scaled;
        if s.deficit_mass > 0.0 {
            total += dr * spread / s.deficit_mass;
        }
    }
    Ok(total)
}
