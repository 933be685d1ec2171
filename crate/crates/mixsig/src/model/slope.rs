//! Slope functions gamma: [0,1] -> R^D stored as Bernstein coefficient vectors.
//!
//! A Bernstein polynomial is nondecreasing whenever its coefficients are, which
//! makes the monotonicity requirement a property of the coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFunction {
    /// `coefs[d]` are the Bernstein coefficients of component d (degree = len - 1).
    coefs: Vec<Vec<f64>>,
}

fn bernstein_eval(c: &[f64], t: f64) -> f64 {
    // de Casteljau
    let mut b = c.to_vec();
    let m = b.len();
    for r in 1..m {
        for k in 0..m - r {
            b[k] = (1.0 - t) * b[k] + t * b[k + 1];
        }
    }
    b[0]
}

fn bernstein_deriv(c: &[f64], t: f64) -> f64 {
    let m = c.len();
    if m < 2 {
        return 0.0;
    }
    let deg = (m - 1) as f64;
    let diffs: Vec<f64> = c.windows(2).map(|w| deg * (w[1] - w[0])).collect();
    bernstein_eval(&diffs, t)
}

/// Bernstein basis values b_{k,deg}(t), k = 0..=deg.
pub fn bernstein_basis(deg: usize, t: f64) -> Vec<f64> {
    let mut b = vec![0.0; deg + 1];
    b[0] = 1.0;
    for r in 1..=deg {
        let mut prev = 0.0;
        for k in 0..r {
            let cur = b[k];
            b[k] = prev + (1.0 - t) * cur;
            prev = t * cur;
        }
        b[r] = prev;
    }
    b
}

impl SlopeFunction {
    pub fn bernstein(coefs: Vec<Vec<f64>>) -> Result<Self> {
        if coefs.is_empty() || coefs.iter().any(|c| c.is_empty()) {
            return Err(Error::invalid(
                "slope needs at least one coefficient per component",
            ));
        }
        if coefs.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("slope coefficients must be finite"));
        }
        Ok(Self { coefs })
    }

    /// Scalar linear slope gamma(a) = lo + (hi - lo) a.
    pub fn linear(lo: f64, hi: f64) -> Self {
        Self {
            coefs: vec![vec![lo, hi]],
        }
    }

    /// Scalar slope from Bernstein coefficients.
    pub fn scalar(coefs: Vec<f64>) -> Result<Self> {
        Self::bernstein(vec![coefs])
    }

    /// Scalar identity slope gamma(a) = a.
    pub fn identity() -> Self {
        Self::linear(0.0, 1.0)
    }

    pub fn dim(&self) -> usize {
        self.coefs.len()
    }

    pub fn coefs(&self) -> &[Vec<f64>] {
        &self.coefs
    }

    pub fn component(&self, d: usize, a: f64) -> f64 {
        bernstein_eval(&self.coefs[d], a)
    }

    pub fn component_deriv(&self, d: usize, a: f64) -> f64 {
        bernstein_deriv(&self.coefs[d], a)
    }

    pub fn eval(&self, a: f64) -> Vec<f64> {
        (0..self.dim()).map(|d| self.component(d, a)).collect()
    }

    pub fn deriv(&self, a: f64) -> Vec<f64> {
        (0..self.dim())
            .map(|d| self.component_deriv(d, a))
            .collect()
    }

    /// Z' gamma(a).
    pub fn index(&self, z: &[f64], a: f64) -> f64 {
        (0..self.dim()).map(|d| z[d] * self.component(d, a)).sum()
    }

    /// Z' gamma'(a).
    pub fn index_deriv(&self, z: &[f64], a: f64) -> f64 {
        (0..self.dim())
            .map(|d| z[d] * self.component_deriv(d, a))
            .sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            coefs: self
                .coefs
                .iter()
                .map(|c| c.iter().map(|v| v * s).collect())
                .collect(),
        }
    }

    /// First grid point violating the shape requirements, if any.
    /// Returns (description, alpha).
    pub fn shape_violation(&self, grid: &[f64]) -> Option<(String, f64)> {
        let mut strictly = vec![false; self.dim()];
        for d in 0..self.dim() {
            let mut prev: Option<f64> = None;
            for &a in grid {
                let v = self.component(d, a);
                let dv = self.component_deriv(d, a);
                if !v.is_finite() || !dv.is_finite() {
                    return Some((format!("component {} not finite", d + 1), a));
                }
                if v < -1e-12 {
                    return Some((format!("component {} negative ({v:.3e})", d + 1), a));
                }
                if let Some(p) = prev {
                    if v < p - 1e-12 {
                        return Some((format!("component {} decreasing", d + 1), a));
                    }
                    if v > p + 1e-12 {
                        strictly[d] = true;
                    }
                }
                prev = Some(v);
            }
        }
        if !strictly.iter().any(|s| *s) {
            return Some((
                "no strictly increasing component".into(),
                grid[grid.len() - 1],
            ));
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_slope_values_and_derivative() {
        let g = SlopeFunction::linear(0.5, 1.0);
        assert!((g.component(0, 0.3) - 0.65).abs() < 1e-15);
        assert!((g.component_deriv(0, 0.3) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn basis_partition_of_unity() {
        let b = bernstein_basis(5, 0.37);
        assert!((b.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let c = [0.1, 0.2, 0.5, 0.6, 0.9, 1.3];
        let direct: f64 = b.iter().zip(&c).map(|(x, y)| x * y).sum();
        assert!((direct - bernstein_eval(&c, 0.37)).abs() < 1e-14);
    }

    #[test]
    fn detects_decreasing_piece() {
        let g = SlopeFunction::scalar(vec![0.0, 1.0, 0.2]).unwrap();
        let grid: Vec<f64> = (0..=100).map(|k| k as f64 / 100.0).collect();
        let (msg, a) = g.shape_violation(&grid).unwrap();
        assert!(msg.contains("decreasing"));
        assert!(a > 0.5);
    }
}
