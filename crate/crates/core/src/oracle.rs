//! Slow independent references for tests: an exact transportation-simplex LP
//! solver, fixed-step dual ascent, and bisection for the threshold equation.
//!
//! Nothing here calls into the solver modules.

use std::collections::BTreeSet;
use std::collections::VecDeque;

use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::types::{CostMatrix, DualPoint, Measure, Problem, TransportPlan};

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub plan: TransportPlan,
    /// `⟨C, X*⟩`.
    pub value: f64,
    /// Basic cells `(i, j)`; a spanning tree of the row/column graph.
    pub basis: BTreeSet<(usize, usize)>,
    /// Row potentials `u` with `u_i + v_j = c_ij` on the basis.
    pub row_potentials: Array1<f64>,
    pub col_potentials: Array1<f64>,
}

const REDUCED_COST_TOL: f64 = 1e-12;

/// Path between row `i` and column `j` through the basis tree, as the list of
/// cells starting with the cell touching column `j`.
fn tree_path(basis: &BTreeSet<(usize, usize)>, n: usize, m: usize, i: usize, j: usize) -> Option<Vec<(usize, usize)>> {
    // Nodes 0..n are rows, n..n+m are columns.
    let mut adj = vec![Vec::new(); n + m];
    for &(r, c) in basis {
        adj[r].push(n + c);
        adj[n + c].push(r);
    }
    let mut parent = vec![usize::MAX; n + m];
    let start = n + j;
    parent[start] = start;
    let mut queue = VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        if u == i {
            break;
        }
        for &w in &adj[u] {
            if parent[w] == usize::MAX {
                parent[w] = u;
                queue.push_back(w);
            }
        }
    }
    if parent[i] == usize::MAX {
        return None;
    }
    // Walk back from row i to column j, then reverse.
    let mut cells = Vec::new();
    let mut u = i;
    while u != start {
        let w = parent[u];
        let cell = if u < n { (u, w - n) } else { (w, u - n) };
        cells.push(cell);
        u = w;
    }
    cells.reverse();
    Some(cells)
}

fn potentials(basis: &BTreeSet<(usize, usize)>, cost: ArrayView2<f64>, n: usize, m: usize) -> Result<(Array1<f64>, Array1<f64>)> {
    let mut u = vec![f64::NAN; n];
    let mut v = vec![f64::NAN; m];
    u[0] = 0.0;
    let mut changed = true;
    while changed {
        changed = false;
        for &(r, c) in basis {
            if !u[r].is_nan() && v[c].is_nan() {
                v[c] = cost[[r, c]] - u[r];
                changed = true;
            } else if u[r].is_nan() && !v[c].is_nan() {
                u[r] = cost[[r, c]] - v[c];
                changed = true;
            }
        }
    }
    if u.iter().chain(&v).any(|x| x.is_nan()) {
        return Err(Error::Oracle("basis is not a spanning tree".into()));
    }
    Ok((Array1::from(u), Array1::from(v)))
}

/// Exact optimum of `min ⟨C, X⟩` over `U(a, b)`.
///
/// Northwest-corner start, MODI potentials, and Bland's rule for both the
/// entering cell (first in row-major order with negative reduced cost) and
/// the leaving cell (first in row-major order among the minimising cells).
pub fn lp_transport_simplex(a: &Measure, b: &Measure, c: &CostMatrix) -> Result<LpSolution> {
    let (n, m) = (a.len(), b.len());
    if c.rows() != n || c.cols() != m {
        return Err(Error::Dimension(format!("cost is {}x{}, measures are {n} and {m}", c.rows(), c.cols())));
    }
    let cost = c.entries();
    let mut x = Array2::<f64>::zeros((n, m));
    let mut basis = BTreeSet::new();

    let mut supply: Vec<f64> = a.as_slice().to_vec();
    let mut demand: Vec<f64> = b.as_slice().to_vec();
    let (mut i, mut j) = (0, 0);
    loop {
        let q = supply[i].min(demand[j]);
        x[[i, j]] = q;
        basis.insert((i, j));
        supply[i] -= q;
        demand[j] -= q;
        if i == n - 1 && j == m - 1 {
            break;
        }
        // Advance exactly one index so the basis keeps n + m − 1 cells.
        if j == m - 1 || (i < n - 1 && supply[i] <= demand[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }
    // The last cell absorbs any rounding drift between Σa and Σb.
    x[[n - 1, m - 1]] = x[[n - 1, m - 1]].max(0.0);

    let budget = 50 * (n * m).pow(2) + 1000;
    for _ in 0..budget {
        let (u, v) = potentials(&basis, cost, n, m)?;
        let entering = (0..n)
            .flat_map(|r| (0..m).map(move |col| (r, col)))
            .find(|&(r, col)| !basis.contains(&(r, col)) && cost[[r, col]] - u[r] - v[col] < -REDUCED_COST_TOL);
        let Some((ei, ej)) = entering else {
            let value = cost.iter().zip(x.iter()).map(|(c, x)| c * x).sum();
            return Ok(LpSolution {
                plan: TransportPlan::new(x)?,
                value,
                basis,
                row_potentials: u,
                col_potentials: v,
            });
        };
        let path = tree_path(&basis, n, m, ei, ej)
            .ok_or_else(|| Error::Oracle("entering cell not connected to the basis".into()))?;
        // Entering cell is +, path cells alternate −, +, −, … from column ej.
        let minus: Vec<(usize, usize)> = path.iter().step_by(2).copied().collect();
        let plus: Vec<(usize, usize)> = path.iter().skip(1).step_by(2).copied().collect();
        let theta = minus.iter().map(|&cell| x[cell]).fold(f64::INFINITY, f64::min);
        let leaving = *minus.iter().filter(|&&cell| x[cell] == theta).min().expect("cycle has minus cells");
        for &cell in &minus {
            x[cell] -= theta;
        }
        for &cell in &plus {
            x[cell] += theta;
        }
        x[[ei, ej]] = theta;
        x[leaving] = 0.0;
        basis.remove(&leaving);
        basis.insert((ei, ej));
    }
    Err(Error::Oracle(format!("no optimal basis after {budget} pivots")))
}

/// High-precision maximiser of the dual with its diagnostics.
#[derive(Debug, Clone)]
pub struct DualReference {
    /// Minimum-norm maximiser.
    pub dual: DualPoint,
    /// φ*.
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    /// `‖(λ*, μ*)‖₂`.
    pub r2: f64,
}

fn naive_dual(p: &Problem, lambda: &[f64], mu: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let (n, m) = (p.n(), p.m());
    let c = p.cost.entries();
    let (a, b) = (p.a.as_slice(), p.b.as_slice());
    let mut value = 0.0;
    let mut grad_l: Vec<f64> = a.iter().map(|x| -x).collect();
    let mut grad_m: Vec<f64> = b.iter().map(|x| -x).collect();
    for i in 0..n {
        for j in 0..m {
            let t = -c[[i, j]] - lambda[i] - mu[j];
            if t > 0.0 {
                value -= t * t / (2.0 * p.gamma);
                grad_l[i] += t / p.gamma;
                grad_m[j] += t / p.gamma;
            }
        }
    }
    for i in 0..n {
        value -= lambda[i] * a[i];
    }
    for j in 0..m {
        value -= mu[j] * b[j];
    }
    (value, grad_l, grad_m)
}

/// Fixed-step gradient ascent with step `γ/(n+m)` until `‖∇φ‖₂ ≤ tol`.
///
/// φ is invariant under `(λ + t, μ − t)`; the returned point is shifted to
/// the minimum-norm representative.
pub fn dual_ascent_reference(p: &Problem, tol: f64, max_iter: usize) -> Result<DualReference> {
    if !(tol > 0.0) {
        return Err(Error::Instance(format!("tol must be positive, got {tol}")));
    }
    let (n, m) = (p.n(), p.m());
    let step = p.gamma / (n + m) as f64;
    let mut lambda = vec![0.0; n];
    let mut mu = vec![0.0; m];
    for k in 0..=max_iter {
        let (value, gl, gm) = naive_dual(p, &lambda, &mu);
        let gnorm = gl.iter().chain(&gm).map(|g| g * g).sum::<f64>().sqrt();
        if gnorm <= tol {
            let shift = (mu.iter().sum::<f64>() - lambda.iter().sum::<f64>()) / (n + m) as f64;
            let lambda = Array1::from_iter(lambda.iter().map(|l| l + shift));
            let mu = Array1::from_iter(mu.iter().map(|x| x - shift));
            let r2 = (lambda.dot(&lambda) + mu.dot(&mu)).sqrt();
            return Ok(DualReference {
                dual: DualPoint::new(lambda, mu)?,
                value,
                gradient_norm: gnorm,
                iterations: k,
                r2,
            });
        }
        for (l, g) in lambda.iter_mut().zip(&gl) {
            *l += step * g;
        }
        for (x, g) in mu.iter_mut().zip(&gm) {
            *x += step * g;
        }
    }
    Err(Error::Oracle(format!("dual ascent did not reach tol {tol} in {max_iter} iterations")))
}

/// Solves `Σ_j [−v_j − λ]₊ = target` by 200 bisection steps.
pub fn bisection_threshold(v: &[f64], target: f64) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let mass = |l: f64| v.iter().map(|x| (-x - l).max(0.0)).sum::<f64>();
    let (mut lo, mut hi) = (-max - target - 1.0, -min);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}
