//! One-dimensional interpolation on sorted grids.

use crate::error::{Error, Result};

/// Locate `x` in a sorted grid: index k with xs[k] <= x <= xs[k+1] (clamped).
pub fn bracket(xs: &[f64], x: f64) -> usize {
    let n = xs.len();
    if x <= xs[0] {
        return 0;
    }
    if x >= xs[n - 1] {
        return n - 2;
    }
    match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(k) => k.min(n - 2),
        Err(k) => k - 1,
    }
}

/// Piecewise cubic Hermite interpolant with prescribed slopes.
#[derive(Debug, Clone)]
pub struct CubicHermite {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub ds: Vec<f64>,
}

impl CubicHermite {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, ds: Vec<f64>) -> Result<Self> {
        if xs.len() < 2 || xs.len() != ys.len() || xs.len() != ds.len() {
            return Err(Error::invalid(
                "hermite interpolant needs matching grids of length >= 2",
            ));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("hermite grid must be strictly increasing"));
        }
        Ok(Self { xs, ys, ds })
    }

    /// Fritsch-Carlson monotone slopes for data that is monotone.
    pub fn monotone(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(Error::invalid("monotone interpolant needs >= 2 points"));
        }
        let delta: Vec<f64> = (0..n - 1)
            .map(|k| (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k]))
            .collect();
        let mut d = vec![0.0; n];
        d[0] = delta[0];
        d[n - 1] = delta[n - 2];
        for k in 1..n - 1 {
            if delta[k - 1] * delta[k] <= 0.0 {
                d[k] = 0.0;
            } else {
                let h0 = xs[k] - xs[k - 1];
                let h1 = xs[k + 1] - xs[k];
                let w1 = 2.0 * h1 + h0;
                let w2 = h1 + 2.0 * h0;
                d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
            }
        }
        Self::new(xs, ys, d)
    }

    fn basis(&self, x: f64) -> (usize, f64, f64) {
        let k = bracket(&self.xs, x);
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        (k, t, h)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (k, t, h) = self.basis(x);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[k] + h10 * h * self.ds[k] + h01 * self.ys[k + 1] + h11 * h * self.ds[k + 1]
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let (k, t, h) = self.basis(x);
        let t2 = t * t;
        let d00 = 6.0 * t2 - 6.0 * t;
        let d10 = 3.0 * t2 - 4.0 * t + 1.0;
        let d01 = -6.0 * t2 + 6.0 * t;
        let d11 = 3.0 * t2 - 2.0 * t;
        (d00 * self.ys[k] + d01 * self.ys[k + 1]) / h + d10 * self.ds[k] + d11 * self.ds[k + 1]
    }

    /// Inverse of an increasing interpolant by bracketing plus Newton.
    pub fn inverse(&self, y: f64) -> f64 {
        let n = self.xs.len();
        if y <= self.ys[0] {
            return self.xs[0];
        }
        if y >= self.ys[n - 1] {
            return self.xs[n - 1];
        }
        let k = bracket(&self.ys, y);
        let (mut lo, mut hi) = (self.xs[k], self.xs[k + 1]);
        crate::numerics::roots::newton_bisect(
            |x| self.eval(x) - y,
            |x| self.deriv(x),
            lo,
            hi,
            1e-15,
        )
        .unwrap_or_else(|_| {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if self.eval(mid) < y {
                    lo = mid
                } else {
                    hi = mid
                }
            }
            0.5 * (lo + hi)
        })
    }
}

/// Piecewise-linear interpolation (clamped at the ends).
pub fn linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let k = bracket(xs, x);
    let t = ((x - xs[k]) / (xs[k + 1] - xs[k])).clamp(0.0, 1.0);
    ys[k] + t * (ys[k + 1] - ys[k])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_reproduces_cubic() {
        let xs: Vec<f64> = (0..6).map(|k| k as f64 * 0.2).collect();
        let f = |x: f64| 1.0 + x - 2.0 * x * x + x * x * x;
        let df = |x: f64| 1.0 - 4.0 * x + 3.0 * x * x;
        let h = CubicHermite::new(
            xs.clone(),
            xs.iter().map(|&x| f(x)).collect(),
            xs.iter().map(|&x| df(x)).collect(),
        )
        .unwrap();
        for &x in &[0.03, 0.5, 0.77, 0.99] {
            assert!((h.eval(x) - f(x)).abs() < 1e-14);
            assert!((h.deriv(x) - df(x)).abs() < 1e-13);
        }
    }

    #[test]
    fn monotone_inverse_round_trip() {
        let xs: Vec<f64> = (0..11).map(|k| k as f64 / 10.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x + x).collect();
        let h = CubicHermite::monotone(xs, ys).unwrap();
        for &x in &[0.05, 0.33, 0.9] {
            assert!((h.inverse(h.eval(x)) - x).abs() < 1e-12);
        }
    }
}
