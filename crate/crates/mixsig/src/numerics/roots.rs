//! Scalar root finding.

use crate::error::{Error, Result};

/// Safeguarded Newton iteration on a sign-changing bracket [lo, hi].
pub fn newton_bisect<F, D>(mut f: F, mut df: D, lo: f64, hi: f64, xtol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
    D: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (lo, hi);
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 {
        return Err(Error::numerical("root not bracketed", None));
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx * fa < 0.0 {
            b = x;
        } else {
            a = x;
            fa = fx;
        }
        let d = df(x);
        let mut next = if d != 0.0 { x - fx / d } else { f64::NAN };
        if !(next > a && next < b) {
            next = 0.5 * (a + b);
        }
        if (next - x).abs() <= xtol * (1.0 + x.abs()) || (b - a) <= xtol {
            return Ok(next);
        }
        x = next;
    }
    Ok(x)
}

/// Bisection on a monotone function; returns x with f(x) ~ 0 within [lo, hi].
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, xtol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 {
        return Err(Error::numerical("root not bracketed", None));
    }
    let sa = fa.signum();
    while b - a > xtol {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == sa {
            a = m
        } else {
            b = m
        }
    }
    Ok(0.5 * (a + b))
}
