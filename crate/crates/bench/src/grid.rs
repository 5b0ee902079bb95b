use eot_core::CostMatrix;
use ndarray::Array2;

/// Euclidean distances between the pixels of a `height × width` grid,
/// indexed row-major. With `normalise` the entries are divided by their
/// maximum so that `‖C‖∞ = 1`.
pub fn grid_cost(height: usize, width: usize, normalise: bool) -> CostMatrix {
    let n = height * width;
    let entries = Array2::from_shape_fn((n, n), |(p, q)| {
        let dr = (p / width) as f64 - (q / width) as f64;
        let dc = (p % width) as f64 - (q % width) as f64;
        dr.hypot(dc)
    });
    let cost = CostMatrix::new(entries).expect("grid distances are finite");
    if normalise {
        cost.normalised()
    } else {
        cost
    }
}
