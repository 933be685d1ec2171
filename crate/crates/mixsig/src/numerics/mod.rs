//! Numerical building blocks: quadrature, ODE integration, interpolation,
//! finite differences, root finding and normal-distribution helpers.

pub mod diff;
pub mod interp;
pub mod lsq;
pub mod ode;
pub mod quadrature;
pub mod roots;
pub mod special;

/// `n` equally spaced points on [a, b], endpoints included.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|k| {
            if k == n - 1 {
                b
            } else {
                a + (b - a) * k as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Sup norm of the difference of two equal-length slices.
pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
