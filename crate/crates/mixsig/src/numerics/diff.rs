//! Finite differences and polynomial extrapolation to zero.

use crate::error::{Error, Result};

/// Five-point central difference.
pub fn central5<F: FnMut(f64) -> f64>(mut f: F, x: f64, h: f64) -> f64 {
    let f1 = f(x + h);
    let fm1 = f(x - h);
    let f2 = f(x + 2.0 * h);
    let fm2 = f(x - 2.0 * h);
    (8.0 * (f1 - fm1) - (f2 - fm2)) / (12.0 * h)
}

/// Second-order central difference.
pub fn central3<F: FnMut(f64) -> f64>(mut f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// One-sided second-order difference pointing into the domain (`dir` = +1 or -1).
pub fn one_sided3<F: FnMut(f64) -> f64>(mut f: F, x: f64, h: f64, dir: f64) -> f64 {
    let h = h * dir;
    (-3.0 * f(x) + 4.0 * f(x + h) - f(x + 2.0 * h)) / (2.0 * h)
}

/// Derivative on [0, 1] that switches to one-sided stencils near the ends.
pub fn unit_interval_deriv<F: FnMut(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    if x - 2.0 * h < 0.0 {
        one_sided3(f, x, h, 1.0)
    } else if x + 2.0 * h > 1.0 {
        one_sided3(f, x, h, -1.0)
    } else {
        central5(f, x, h)
    }
}

/// Neville table for the value at h = 0 of the interpolating polynomial through (h_k, v_k).
/// Entry m is the extrapolant through the m + 1 smallest-h points (the last uses all).
pub fn neville_to_zero(h: &[f64], v: &[f64]) -> Vec<f64> {
    assert_eq!(h.len(), v.len());
    let n = h.len();
    let mut p = v.to_vec();
    let mut diag = vec![p[n - 1]];
    // p[i] holds the extrapolant through points i..=i+m after stage m.
    for m in 1..n {
        for i in 0..n - m {
            p[i] = (h[i + m] * p[i] - h[i] * p[i + 1]) / (h[i + m] - h[i]);
        }
        diag.push(p[n - m - 1]);
    }
    diag
}

/// Extrapolate f(h) to h = 0 from a geometric schedule h0, h0/2, ... (levels points).
/// Fails when the last two extrapolants disagree by more than `tol`.
pub fn extrapolate_to_zero<F: FnMut(f64) -> f64>(
    mut f: F,
    h0: f64,
    levels: usize,
    tol: f64,
) -> Result<(f64, Vec<f64>)> {
    let levels = levels.max(2);
    let hs: Vec<f64> = (0..levels).map(|k| h0 / 2f64.powi(k as i32)).collect();
    let vs: Vec<f64> = hs.iter().map(|&h| f(h)).collect();
    let diag = neville_to_zero(&hs, &vs);
    let last = diag[diag.len() - 1];
    let prev = diag[diag.len() - 2];
    let gap = (last - prev).abs();
    if !last.is_finite() || gap > tol * (1.0 + last.abs()) {
        return Err(Error::numerical(
            format!("extrapolation did not settle: sequence {vs:?}"),
            Some(gap),
        ));
    }
    Ok((last, vs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central5_is_fourth_order() {
        let d = central5(|x: f64| x.sin(), 0.7, 1e-2);
        assert!((d - 0.7f64.cos()).abs() < 1e-9);
    }

    #[test]
    fn neville_recovers_polynomial_limit() {
        let h = [0.4, 0.2, 0.1, 0.05];
        let v: Vec<f64> = h
            .iter()
            .map(|x| 2.0 + 3.0 * x - x * x + 0.5 * x * x * x)
            .collect();
        let d = neville_to_zero(&h, &v);
        assert!((d[3] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn extrapolation_of_smooth_function() {
        let (v, _) = extrapolate_to_zero(|h| (1.0 + h).ln() / h, 0.5, 6, 1e-6).unwrap();
        assert!((v - 1.0).abs() < 1e-7);
    }
}
