//! Exact block maximisation of the dual.
//!
//! With μ fixed, row `i` of the optimality system reads
//! `Σ_j [−c_ij − λ_i − μ_j]₊ = γ a_i`, a piecewise-linear decreasing equation
//! in λ_i. Sorting `v = C_i + μ` and finding the last order statistic that
//! stays active solves it exactly; the column system is symmetric.

use std::cmp::Ordering;

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::types::{DualPoint, Problem};

/// Solution of `Σ_j [−v_j − λ]₊ = target`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdResult {
    /// The multiplier λ.
    pub value: f64,
    /// Number of active entries; 0 for a zero target.
    pub active_count: usize,
}

/// Upper end of the window around the minimum that can hold active entries.
///
/// An entry `x` with `x − min > target` is never active, since the minimum
/// alone already carries mass `x − min` once λ sits at `−x`. The factor 2
/// keeps borderline entries in, where the exact test below decides.
fn candidate_bound(min: f64, target: f64) -> f64 {
    min + 2.0 * target
}

/// Solves against `cands`, which holds every entry up to
/// [`candidate_bound`] (extra entries are harmless). Sorts `cands`.
fn solve_candidates(cands: &mut [f64], min: f64, target: f64) -> ThresholdResult {
    if target == 0.0 {
        return ThresholdResult {
            value: -min,
            active_count: 0,
        };
    }
    cands.sort_unstable_by(|x, y| x.partial_cmp(y).unwrap_or(Ordering::Equal));
    let mut prefix = 0.0;
    let mut active = 0;
    for (idx, &x) in cands.iter().enumerate() {
        // Mass the first `idx` entries carry when λ sits at −x.
        if idx as f64 * x - prefix > target {
            break;
        }
        prefix += x;
        active = idx + 1;
    }
    ThresholdResult {
        value: -(target + prefix) / active as f64,
        active_count: active,
    }
}

/// Returns λ with `Σ_j [−v_j − λ]₊ = target`.
pub fn threshold_solve(v: &[f64], target: f64) -> Result<ThresholdResult> {
    if v.is_empty() {
        return Err(Error::Instance("threshold solve on an empty vector".into()));
    }
    if !(target >= 0.0 && target.is_finite()) {
        return Err(Error::Instance(format!("threshold target must be nonnegative, got {target}")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Instance("threshold input has non-finite entries".into()));
    }
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let bound = candidate_bound(min, target);
    let mut cands: Vec<f64> = v.iter().copied().filter(|x| *x <= bound).collect();
    Ok(solve_candidates(&mut cands, min, target))
}

/// `Σ (x + value)²` over the active entries of sorted candidates.
fn active_sq(cands: &[f64], r: &ThresholdResult) -> f64 {
    cands[..r.active_count].iter().map(|x| (x + r.value) * (x + r.value)).sum()
}

/// Overwrites `lambda` with the exact maximiser of φ(·, μ). Returns
/// `Σ [−C − λ1ᵀ − 1μᵀ]₊²` at the new point.
pub(crate) fn maximise_lambda(p: &Problem, mu: &Array1<f64>, lambda: &mut Array1<f64>) -> f64 {
    let m = p.m();
    let mu = mu.as_slice().expect("contiguous mu");
    let a = p.a.as_slice();
    let mut cands = Vec::with_capacity(m);
    let mut sq = 0.0;
    for (i, crow) in p.cost.as_slice().chunks_exact(m).enumerate() {
        let target = p.gamma * a[i];
        let min = crow.iter().zip(mu).map(|(c, mj)| c + mj).fold(f64::INFINITY, f64::min);
        let bound = candidate_bound(min, target);
        cands.clear();
        cands.extend(crow.iter().zip(mu).map(|(c, mj)| c + mj).filter(|x| *x <= bound));
        let r = solve_candidates(&mut cands, min, target);
        sq += active_sq(&cands, &r);
        lambda[i] = r.value;
    }
    sq
}

/// Overwrites `mu` with the exact maximiser of φ(λ, ·). Scans the cost row by
/// row and gathers per-column candidates. Returns the clipped square sum as
/// [`maximise_lambda`] does.
pub(crate) fn maximise_mu(p: &Problem, lambda: &Array1<f64>, mu: &mut Array1<f64>) -> f64 {
    let m = p.m();
    let b = p.b.as_slice();
    let cost = p.cost.as_slice();
    let mut mins = vec![f64::INFINITY; m];
    for (crow, li) in cost.chunks_exact(m).zip(lambda.iter()) {
        for (min, c) in mins.iter_mut().zip(crow) {
            *min = min.min(c + li);
        }
    }
    let bounds: Vec<f64> = mins.iter().zip(b).map(|(min, bj)| candidate_bound(*min, p.gamma * bj)).collect();
    let mut cands: Vec<Vec<f64>> = vec![Vec::new(); m];
    for (crow, li) in cost.chunks_exact(m).zip(lambda.iter()) {
        for ((cj, c), bound) in cands.iter_mut().zip(crow).zip(&bounds) {
            let v = c + li;
            if v <= *bound {
                cj.push(v);
            }
        }
    }
    let mut sq = 0.0;
    for (j, cj) in cands.iter_mut().enumerate() {
        let r = solve_candidates(cj, mins[j], p.gamma * b[j]);
        sq += active_sq(cj, &r);
        mu[j] = r.value;
    }
    sq
}

/// Exact maximisation over λ with μ held fixed. Afterwards the row marginals
/// of `X(λ, μ)` equal `a`.
pub fn update_lambda(p: &Problem, d: &DualPoint) -> Result<DualPoint> {
    d.check_dims(p)?;
    let mut out = d.clone();
    maximise_lambda(p, &d.mu, &mut out.lambda);
    Ok(out)
}

/// Exact maximisation over μ with λ held fixed. Afterwards the column
/// marginals of `X(λ, μ)` equal `b`.
pub fn update_mu(p: &Problem, d: &DualPoint) -> Result<DualPoint> {
    d.check_dims(p)?;
    let mut out = d.clone();
    maximise_mu(p, &d.lambda, &mut out.mu);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::{dual_gradient, dual_objective, recover_plan};
    use crate::types::{CostMatrix, Measure};
    use ndarray::{array, Array2};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent bisection on the monotone map λ ↦ Σ[−v_j − λ]₊.
    fn bisect(v: &[f64], target: f64) -> f64 {
        let h = |l: f64| v.iter().map(|x| (-x - l).max(0.0)).sum::<f64>();
        let (mut lo, mut hi) = (-100.0, 100.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if h(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    #[test]
    fn symmetric_pair() {
        let r = threshold_solve(&[0.0, 0.0], 1.0).unwrap();
        assert_eq!(r, ThresholdResult { value: -0.5, active_count: 2 });
    }

    #[test]
    fn far_entry_stays_inactive() {
        let r = threshold_solve(&[0.0, 10.0], 1.0).unwrap();
        assert_eq!(r.active_count, 1);
        assert!((r.value - -1.0).abs() < 1e-15);
        assert!((r.value - bisect(&[0.0, 10.0], 1.0)).abs() < 1e-12);
    }

    #[test]
    fn both_entries_active() {
        let r = threshold_solve(&[0.0, 1.0], 4.0).unwrap();
        assert_eq!(r.active_count, 2);
        assert!((r.value - -2.5).abs() < 1e-15);
        assert!((r.value - bisect(&[0.0, 1.0], 4.0)).abs() < 1e-12);
    }

    #[test]
    fn zero_target_returns_minus_min() {
        let r = threshold_solve(&[3.0, -2.0, 5.0], 0.0).unwrap();
        assert_eq!(r, ThresholdResult { value: 2.0, active_count: 0 });
    }

    #[test]
    fn rejects_empty_and_negative_target() {
        assert!(threshold_solve(&[], 1.0).is_err());
        assert!(threshold_solve(&[1.0], -1.0).is_err());
    }

    proptest! {
        #[test]
        fn solution_satisfies_the_equation(
            v in proptest::collection::vec(-5.0f64..5.0, 1..40),
            target in 0.0f64..10.0,
        ) {
            let r = threshold_solve(&v, target).unwrap();
            let mass: f64 = v.iter().map(|x| (-x - r.value).max(0.0)).sum();
            prop_assert!((mass - target).abs() < 1e-9 * (1.0 + target));
            prop_assert!((r.value - bisect(&v, target)).abs() < 1e-10);
        }

        #[test]
        fn ties_do_not_change_the_answer(x in -3.0f64..3.0, k in 1usize..10, target in 0.0f64..4.0) {
            let v = vec![x; k];
            let r = threshold_solve(&v, target).unwrap();
            prop_assert!((r.value - (-x - target / k as f64)).abs() < 1e-12);
        }
    }

    fn instance(rng: &mut ChaCha8Rng, n: usize, m: usize, gamma: f64) -> Problem {
        let a = Measure::normalised(Array1::from_shape_fn(n, |_| rng.random::<f64>() + 0.01)).unwrap();
        let b = Measure::normalised(Array1::from_shape_fn(m, |_| rng.random::<f64>() + 0.01)).unwrap();
        let c = CostMatrix::new(Array2::from_shape_fn((n, m), |_| rng.random::<f64>())).unwrap();
        Problem::new(a, b, c, gamma).unwrap()
    }

    #[test]
    fn lambda_update_on_zero_cost() {
        let (n, m, gamma) = (3, 4, 0.6);
        let p = Problem::new(
            Measure::uniform(n).unwrap(),
            Measure::uniform(m).unwrap(),
            CostMatrix::new(Array2::zeros((n, m))).unwrap(),
            gamma,
        )
        .unwrap();
        let d = update_lambda(&p, &DualPoint::zeros(n, m)).unwrap();
        for l in d.lambda.iter() {
            assert!((l - -gamma / (n * m) as f64).abs() < 1e-15);
        }
        let rows = recover_plan(&p, &d).unwrap().row_sums();
        assert!(rows.iter().all(|r| (r - 1.0 / n as f64).abs() < 1e-15));

        let d = update_mu(&p, &DualPoint::zeros(n, m)).unwrap();
        for u in d.mu.iter() {
            assert!((u - -gamma / (n * m) as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn block_updates_zero_their_gradient_and_ascend() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..25 {
            let p = instance(&mut rng, 6, 5, 0.05);
            let d = DualPoint::new(
                Array1::from_shape_fn(6, |_| -rng.random::<f64>()),
                Array1::from_shape_fn(5, |_| -rng.random::<f64>()),
            )
            .unwrap();
            let before = dual_objective(&p, &d).unwrap();
            let dl = update_lambda(&p, &d).unwrap();
            let (gl, _) = dual_gradient(&p, &dl).unwrap();
            assert!(gl.iter().all(|g| g.abs() < 1e-10));
            let mid = dual_objective(&p, &dl).unwrap();
            assert!(mid >= before - 1e-12);
            let dm = update_mu(&p, &dl).unwrap();
            let (_, gm) = dual_gradient(&p, &dm).unwrap();
            assert!(gm.iter().all(|g| g.abs() < 1e-10));
            assert!(dual_objective(&p, &dm).unwrap() >= mid - 1e-12);
        }
    }

    #[test]
    fn block_solves_report_the_clipped_square_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..20 {
            let p = instance(&mut rng, 7, 5, 0.05);
            let mut d = DualPoint::zeros(7, 5);
            for (lam_block, rounds) in [(true, 1), (false, 1), (true, 2)] {
                for _ in 0..rounds {
                    let sq = if lam_block {
                        let mu = d.mu.clone();
                        maximise_lambda(&p, &mu, &mut d.lambda)
                    } else {
                        let lambda = d.lambda.clone();
                        maximise_mu(&p, &lambda, &mut d.mu)
                    };
                    let value = -sq / (2.0 * p.gamma) - crate::dual::linear_terms(&p, &d);
                    let direct = dual_objective(&p, &d).unwrap();
                    assert!((value - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
                }
            }
        }
    }

    #[test]
    fn zero_mass_row_empties_the_plan_row() {
        let a = Measure::new(array![0.0, 0.4, 0.6]).unwrap();
        let b = Measure::uniform(2).unwrap();
        let c = CostMatrix::new(array![[0.1, 0.2], [0.3, 0.0], [0.5, 0.4]]).unwrap();
        let p = Problem::new(a, b, c, 0.1).unwrap();
        let d = update_lambda(&p, &DualPoint::new(array![0.0, 0.0, 0.0], array![-0.5, -0.7]).unwrap()).unwrap();
        let x = recover_plan(&p, &d).unwrap();
        assert!(x.entries().row(0).iter().all(|&v| v == 0.0));
    }
}
