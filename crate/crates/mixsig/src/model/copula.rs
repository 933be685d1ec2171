//! Exchangeable signal copulas c(a | Z).
//!
//! All shipped families are exchangeable, so conditional quantities only depend
//! on how many coordinates are conditioned on and on their values.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::covariates::Covariates;
use crate::error::{Error, Result};
use crate::numerics::quadrature::{gauss_hermite_normal, Rule};
use crate::numerics::special::{norm_cdf, norm_quantile};

/// Signal values are kept this far from 0 and 1 before mapping to normal scores.
const EDGE: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CopulaKind {
    Independence,
    /// Equicorrelated Gaussian copula with fixed correlation.
    Gaussian {
        rho: f64,
    },
    /// Gaussian copula with rho(Z) = base + amplitude * tanh(slope * (mean(Z) - center)).
    GaussianCovariate {
        base: f64,
        amplitude: f64,
        slope: f64,
        center: f64,
    },
}

#[derive(Debug, Clone)]
pub struct SignalCopula {
    n: usize,
    kind: CopulaKind,
    hermite: Rule,
}

impl PartialEq for SignalCopula {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.kind == other.kind
    }
}

fn clamp_unit(a: f64) -> f64 {
    a.clamp(EDGE, 1.0 - EDGE)
}

/// Normal score of an upper limit; 0 and 1 map to -inf and +inf.
fn score_limit(u: f64) -> f64 {
    if u <= 0.0 {
        f64::NEG_INFINITY
    } else if u >= 1.0 {
        f64::INFINITY
    } else {
        norm_quantile(u)
    }
}

impl SignalCopula {
    pub fn new(n: usize, kind: CopulaKind) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("copula needs n >= 2"));
        }
        let lower = if n == 2 { -1.0 } else { 0.0 };
        let check = |r: f64| -> Result<()> {
            if !(r > lower - 1e-15 && r < 1.0) {
                return Err(Error::invalid(format!(
                    "correlation {r} outside admissible range [{lower}, 1) for n = {n}"
                )));
            }
            Ok(())
        };
        match &kind {
            CopulaKind::Independence => {}
            CopulaKind::Gaussian { rho } => {
                check(*rho)?;
                if n == 2 && *rho <= -1.0 {
                    return Err(Error::invalid("rho must exceed -1"));
                }
            }
            CopulaKind::GaussianCovariate {
                base, amplitude, ..
            } => {
                check(base - amplitude.abs())?;
                check(base + amplitude.abs())?;
            }
        }
        Ok(Self {
            n,
            kind,
            hermite: gauss_hermite_normal(64),
        })
    }

    pub fn independence(n: usize) -> Self {
        Self::new(n, CopulaKind::Independence).unwrap()
    }

    pub fn gaussian(n: usize, rho: f64) -> Result<Self> {
        Self::new(n, CopulaKind::Gaussian { rho })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &CopulaKind {
        &self.kind
    }

    /// Correlation of the normal scores at covariate point z (0 for independence).
    pub fn rho(&self, z: &Covariates) -> f64 {
        match &self.kind {
            CopulaKind::Independence => 0.0,
            CopulaKind::Gaussian { rho } => *rho,
            CopulaKind::GaussianCovariate {
                base,
                amplitude,
                slope,
                center,
            } => {
                let m = z.values().iter().sum::<f64>() / z.values().len() as f64;
                base + amplitude * (slope * (m - center)).tanh()
            }
        }
    }

    /// Density of any k coordinates (k <= n) at values `a`.
    pub fn marginal_density(&self, a: &[f64], z: &Covariates) -> f64 {
        let rho = self.rho(z);
        if rho == 0.0 || a.len() < 2 {
            return 1.0;
        }
        let k = a.len() as f64;
        let q: Vec<f64> = a.iter().map(|v| norm_quantile(clamp_unit(*v))).collect();
        let s: f64 = q.iter().sum();
        let ss: f64 = q.iter().map(|v| v * v).sum();
        let denom = 1.0 + (k - 1.0) * rho;
        let quad = (ss - rho * s * s / denom) / (1.0 - rho);
        let logdet = (k - 1.0) * (1.0 - rho).ln() + denom.ln();
        (-0.5 * logdet - 0.5 * (quad - ss)).exp()
    }

    /// Joint density c(a | Z) of all n signals.
    pub fn density(&self, a: &[f64], z: &Covariates) -> f64 {
        debug_assert_eq!(a.len(), self.n);
        self.marginal_density(a, z)
    }

    /// P(A_k <= upper_k for the listed coordinates | the `given` coordinates take these values).
    /// `given.len() + upper.len()` must not exceed n.
    pub fn cond_prob(&self, given: &[f64], upper: &[f64], z: &Covariates) -> f64 {
        if upper.is_empty() {
            return 1.0;
        }
        let rho = self.rho(z);
        if rho == 0.0 {
            return upper.iter().map(|u| u.clamp(0.0, 1.0)).product();
        }
        if upper.iter().any(|u| *u <= 0.0) {
            return 0.0;
        }
        let m = given.len() as f64;
        let s: f64 = given.iter().map(|v| norm_quantile(clamp_unit(*v))).sum();
        let denom = 1.0 + (m - 1.0).max(0.0) * rho;
        let (mu, var, cov) = if given.is_empty() {
            (0.0, 1.0, rho)
        } else {
            (
                rho * s / denom,
                1.0 - m * rho * rho / denom,
                rho - m * rho * rho / denom,
            )
        };
        let x: Vec<f64> = upper.iter().map(|u| score_limit(*u)).collect();
        if x.len() == 1 {
            return norm_cdf((x[0] - mu) / var.sqrt());
        }
        if cov < 0.0 {
            // Only reachable for n = 2 with negative rho, where upper has one entry.
            return f64::NAN;
        }
        let a = cov.sqrt();
        let b = (var - cov).sqrt();
        self.hermite.expect(|w| {
            x.iter()
                .map(|xk| norm_cdf((xk - mu - a * w) / b))
                .product::<f64>()
        })
    }

    /// Draw one signal vector given z.
    pub fn sample<R: Rng + ?Sized>(&self, z: &Covariates, rng: &mut R) -> Vec<f64> {
        let rho = self.rho(z);
        if rho == 0.0 {
            return (0..self.n).map(|_| rng.random::<f64>()).collect();
        }
        let e: Vec<f64> = (0..self.n).map(|_| rng.sample(StandardNormal)).collect();
        if rho >= 0.0 {
            let w: f64 = rng.sample(StandardNormal);
            e.iter()
                .map(|ej| norm_cdf(rho.sqrt() * w + (1.0 - rho).sqrt() * ej))
                .collect()
        } else {
            let q1 = e[0];
            let q2 = rho * e[0] + (1.0 - rho * rho).sqrt() * e[1];
            vec![norm_cdf(q1), norm_cdf(q2)]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quadrature::gauss_legendre;
    use crate::numerics::special::norm_pdf;

    fn z2() -> Covariates {
        Covariates::scalar(&[1.0, 1.0]).unwrap()
    }

    /// Integral of g over (0, u) computed in normal scores, which removes the edge singularities.
    fn score_integral<F: Fn(f64) -> f64>(u: f64, g: F) -> f64 {
        let gl = gauss_legendre(20);
        let hi = if u >= 1.0 { 9.0 } else { norm_quantile(u) };
        gl.integrate_composite(-9.0, hi, 30, |x| g(norm_cdf(x)) * norm_pdf(x))
    }

    #[test]
    fn bivariate_marginal_is_uniform() {
        let c = SignalCopula::gaussian(2, 0.6).unwrap();
        for &a in &[0.1, 0.5, 0.85] {
            let m = score_integral(1.0, |t| c.density(&[a, t], &z2()));
            assert!((m - 1.0).abs() < 1e-9, "a={a} m={m}");
        }
    }

    #[test]
    fn conditional_cdf_matches_integrated_density() {
        let c = SignalCopula::gaussian(2, 0.4).unwrap();
        let alpha = 0.3;
        let u = 0.6;
        let direct = score_integral(u, |t| c.density(&[alpha, t], &z2()));
        let formula = c.cond_prob(&[alpha], &[u], &z2());
        assert!((direct - formula).abs() < 1e-10, "{direct} {formula}");
    }

    #[test]
    fn trivariate_conditional_against_quadrature() {
        let z = Covariates::scalar(&[1.0, 1.0, 1.0]).unwrap();
        let c = SignalCopula::gaussian(3, 0.5).unwrap();
        let alpha = 0.4;
        let (u2, u3) = (0.7, 0.5);
        let direct = score_integral(u2, |t2| {
            score_integral(u3, |t3| c.density(&[alpha, t2, t3], &z))
        });
        let formula = c.cond_prob(&[alpha], &[u2, u3], &z);
        assert!((direct - formula).abs() < 1e-9, "{direct} {formula}");
    }

    #[test]
    fn rejects_bad_correlation() {
        assert!(SignalCopula::gaussian(3, -0.2).is_err());
        assert!(SignalCopula::gaussian(2, 1.0).is_err());
        assert!(SignalCopula::gaussian(2, -0.5).is_ok());
    }
}
