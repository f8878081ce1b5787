//! Hausdorff distance between point clouds in ℂⁿ.

use num_complex::Complex64;

fn dist2(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum()
}

/// sup over a ∈ A of the distance from a to B.
pub fn directed_hausdorff(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> f64 {
    let d = crate::par::map_slice(a, |x| b.iter().map(|y| dist2(x, y)).fold(f64::INFINITY, f64::min));
    d.into_iter().fold(0.0, f64::max).sqrt()
}

/// Symmetric Hausdorff distance; empty clouds give infinity.
pub fn hausdorff_distance(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    directed_hausdorff(a, b).max(directed_hausdorff(b, a))
}

/// Index of the nearest point of `cloud` to `x` and the squared distance.
pub fn nearest(cloud: &[Vec<Complex64>], x: &[Complex64]) -> (usize, f64) {
    cloud.iter().enumerate().map(|(i, y)| (i, dist2(x, y))).fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
}
