//! Valuation combiners Phi: R_+^n -> R.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A monomial `coef * prod_j x_j^powers[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub powers: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CombinerKind {
    /// intercept + sum_j w_j x_j
    Additive { weights: Vec<f64>, intercept: f64 },
    /// (1/k) ln sum_j exp(k w_j x_j) over j with w_j > 0; differentiable surrogate of the max.
    SmoothMax { weights: Vec<f64>, sharpness: f64 },
    /// max_j w_j x_j; not differentiable on ties, meant for simulation only.
    HardMax { weights: Vec<f64> },
    /// Sum of monomials.
    Polynomial { n: usize, terms: Vec<Monomial> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Combiner {
    pub kind: CombinerKind,
    /// Input scaling: Phi(x) = kind(x_1 s_1, ..., x_n s_n).
    pub scale: Vec<f64>,
}

impl CombinerKind {
    fn arity(&self) -> usize {
        match self {
            CombinerKind::Additive { weights, .. }
            | CombinerKind::SmoothMax { weights, .. }
            | CombinerKind::HardMax { weights } => weights.len(),
            CombinerKind::Polynomial { n, .. } => *n,
        }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            CombinerKind::Additive { weights, intercept } => {
                intercept + weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            }
            CombinerKind::SmoothMax { weights, sharpness } => {
                let k = *sharpness;
                let args: Vec<f64> = weights
                    .iter()
                    .zip(x)
                    .filter(|(w, _)| **w > 0.0)
                    .map(|(w, v)| k * w * v)
                    .collect();
                let m = args.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let s: f64 = args.iter().map(|a| (a - m).exp()).sum();
                (m + s.ln()) / k
            }
            CombinerKind::HardMax { weights } => weights
                .iter()
                .zip(x)
                .map(|(w, v)| w * v)
                .fold(f64::NEG_INFINITY, f64::max),
            CombinerKind::Polynomial { terms, .. } => terms
                .iter()
                .map(|t| {
                    t.coef
                        * t.powers
                            .iter()
                            .zip(x)
                            .map(|(p, v)| v.powi(*p as i32))
                            .product::<f64>()
                })
                .sum(),
        }
    }

    fn partial(&self, j: usize, x: &[f64]) -> f64 {
        match self {
            CombinerKind::Additive { weights, .. } => weights[j],
            CombinerKind::SmoothMax { weights, sharpness } => {
                if weights[j] <= 0.0 {
                    return 0.0;
                }
                let k = *sharpness;
                let m = weights
                    .iter()
                    .zip(x)
                    .filter(|(w, _)| **w > 0.0)
                    .map(|(w, v)| k * w * v)
                    .fold(f64::NEG_INFINITY, f64::max);
                let s: f64 = weights
                    .iter()
                    .zip(x)
                    .filter(|(w, _)| **w > 0.0)
                    .map(|(w, v)| (k * w * v - m).exp())
                    .sum();
                weights[j] * (k * weights[j] * x[j] - m).exp() / s
            }
            CombinerKind::HardMax { weights } => {
                let vals: Vec<f64> = weights.iter().zip(x).map(|(w, v)| w * v).collect();
                let m = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let first = vals.iter().position(|v| *v == m).unwrap();
                if first == j {
                    weights[j]
                } else {
                    0.0
                }
            }
            CombinerKind::Polynomial { terms, .. } => terms
                .iter()
                .filter(|t| t.powers[j] > 0)
                .map(|t| {
                    let mut v = t.coef * t.powers[j] as f64;
                    for (k, (p, xv)) in t.powers.iter().zip(x).enumerate() {
                        let e = if k == j { *p as i32 - 1 } else { *p as i32 };
                        v *= xv.powi(e);
                    }
                    v
                })
                .sum(),
        }
    }

    fn depends_on(&self, j: usize) -> bool {
        match self {
            CombinerKind::Additive { weights, .. }
            | CombinerKind::SmoothMax { weights, .. }
            | CombinerKind::HardMax { weights } => weights[j] != 0.0,
            CombinerKind::Polynomial { terms, .. } => {
                terms.iter().any(|t| t.coef != 0.0 && t.powers[j] > 0)
            }
        }
    }
}

impl Combiner {
    pub fn new(kind: CombinerKind) -> Result<Self> {
        let n = kind.arity();
        if n == 0 {
            return Err(Error::invalid("combiner arity must be positive"));
        }
        match &kind {
            CombinerKind::SmoothMax { weights, sharpness } => {
                if !(*sharpness > 0.0) {
                    return Err(Error::invalid("smooth-max sharpness must be positive"));
                }
                if !weights.iter().any(|w| *w > 0.0) {
                    return Err(Error::invalid("smooth-max needs a positive weight"));
                }
            }
            CombinerKind::HardMax { weights } if !weights.iter().any(|w| *w > 0.0) => {
                return Err(Error::invalid("max combiner needs a positive weight"));
            }
            CombinerKind::Polynomial { n, terms } => {
                if terms.iter().any(|t| t.powers.len() != *n) {
                    return Err(Error::invalid("monomial powers must have length n"));
                }
            }
            _ => {}
        }
        Ok(Self {
            kind,
            scale: vec![1.0; n],
        })
    }

    pub fn additive(weights: Vec<f64>) -> Self {
        Self::new(CombinerKind::Additive {
            weights,
            intercept: 0.0,
        })
        .unwrap()
    }

    pub fn smooth_max(weights: Vec<f64>, sharpness: f64) -> Result<Self> {
        Self::new(CombinerKind::SmoothMax { weights, sharpness })
    }

    pub fn hard_max(weights: Vec<f64>) -> Result<Self> {
        Self::new(CombinerKind::HardMax { weights })
    }

    /// x_1 + x_2 + x_1 x_2 (two-bidder interaction example).
    pub fn bilinear_interaction() -> Self {
        Self::new(CombinerKind::Polynomial {
            n: 2,
            terms: vec![
                Monomial {
                    coef: 1.0,
                    powers: vec![1, 0],
                },
                Monomial {
                    coef: 1.0,
                    powers: vec![0, 1],
                },
                Monomial {
                    coef: 1.0,
                    powers: vec![1, 1],
                },
            ],
        })
        .unwrap()
    }

    pub fn arity(&self) -> usize {
        self.scale.len()
    }

    fn scaled_input(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.scale).map(|(v, s)| v * s).collect()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.kind.eval(&self.scaled_input(x))
    }

    pub fn partial(&self, j: usize, x: &[f64]) -> f64 {
        self.scale[j] * self.kind.partial(j, &self.scaled_input(x))
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let xs = self.scaled_input(x);
        (0..self.arity())
            .map(|j| self.scale[j] * self.kind.partial(j, &xs))
            .collect()
    }

    /// Indices (0-based) the combiner actually depends on.
    pub fn active_set(&self) -> Vec<usize> {
        (0..self.arity())
            .filter(|&j| self.scale[j] != 0.0 && self.kind.depends_on(j))
            .collect()
    }

    /// Phi(. / lambda).
    pub fn rescaled(&self, lambda: f64) -> Self {
        let mut c = self.clone();
        for s in &mut c.scale {
            *s /= lambda;
        }
        c
    }

    /// Per-coordinate input scaling: Phi(x_1 / f_1, ..., x_n / f_n).
    pub fn coordinate_rescaled(&self, factors: &[f64]) -> Self {
        let mut c = self.clone();
        for (s, f) in c.scale.iter_mut().zip(factors) {
            *s /= f;
        }
        c
    }

    /// Partial derivatives at the origin.
    pub fn origin_gradient(&self) -> Vec<f64> {
        self.gradient(&vec![0.0; self.arity()])
    }

    pub fn is_differentiable(&self) -> bool {
        !matches!(self.kind, CombinerKind::HardMax { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn additive_and_interaction() {
        let c = Combiner::additive(vec![1.0, 1.0]);
        assert_eq!(c.eval(&[0.5, 0.25]), 0.75);
        let b = Combiner::bilinear_interaction();
        assert!((b.eval(&[0.3, 0.5]) - 0.95).abs() < 1e-15);
        assert!((b.partial(0, &[0.3, 0.5]) - 1.5).abs() < 1e-15);
        assert_eq!(b.origin_gradient(), vec![1.0, 1.0]);
    }

    #[test]
    fn smooth_max_tracks_max() {
        let c = Combiner::smooth_max(vec![1.0, 1.0], 80.0).unwrap();
        assert!((c.eval(&[0.5, 0.25]) - 0.5).abs() < 1e-8);
        let g = c.gradient(&[0.5, 0.25]);
        assert!((g[0] + g[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn active_set_excludes_unused_coordinates() {
        let c = Combiner::additive(vec![1.0, 0.0]);
        assert_eq!(c.active_set(), vec![0]);
    }

    #[test]
    fn rescaling_is_input_division() {
        let b = Combiner::bilinear_interaction().rescaled(2.0);
        assert!((b.eval(&[0.6, 1.0]) - (0.3 + 0.5 + 0.15)).abs() < 1e-15);
    }
}
