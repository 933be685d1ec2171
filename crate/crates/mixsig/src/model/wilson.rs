//! Common-value model with Gaussian noise of bidder-specific precision.
//!
//! The value is V = gamma0(F(nu)) with nu standard normal; bidder i observes
//! nu + sigma_i eps_i, encoded as the uniform signal A_i. The covariate
//! Z_i = sqrt(1 + sigma_i^2) / sigma_i^2 grows as the noise shrinks.

use serde::{Deserialize, Serialize};

use super::covariates::Covariates;
use super::Valuation;
use crate::error::{Error, Result};
use crate::numerics::quadrature::{gauss_hermite_normal, Rule};
use crate::numerics::special::norm_quantile;

/// Quantile function gamma0 of the common value, stored through h = gamma0 o F.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ValueQuantile {
    /// gamma0(a) = location + scale * F^{-1}(a), a normal value.
    Normal { location: f64, scale: f64 },
    /// gamma0(a) = exp(mu + s F^{-1}(a)), a lognormal value.
    LogNormal { mu: f64, s: f64 },
}

impl ValueQuantile {
    /// gamma0(F(x)).
    pub fn on_normal_scale(&self, x: f64) -> f64 {
        match self {
            ValueQuantile::Normal { location, scale } => location + scale * x,
            ValueQuantile::LogNormal { mu, s } => (mu + s * x).exp(),
        }
    }

    pub fn quantile(&self, a: f64) -> f64 {
        self.on_normal_scale(norm_quantile(a))
    }
}

#[derive(Debug, Clone)]
pub struct WilsonSpec {
    pub gamma0: ValueQuantile,
    pub n: usize,
    hermite: Rule,
}

/// Z = sqrt(1 + sigma^2) / sigma^2.
pub fn covariate_from_sigma(sigma: f64) -> f64 {
    (1.0 + sigma * sigma).sqrt() / (sigma * sigma)
}

/// 1 / sigma^2 = sqrt(Z^2 + 1/4) - 1/2.
pub fn precision_from_covariate(z: f64) -> f64 {
    (z * z + 0.25).sqrt() - 0.5
}

pub fn sigma_from_covariate(z: f64) -> f64 {
    1.0 / precision_from_covariate(z).sqrt()
}

impl WilsonSpec {
    pub fn new(gamma0: ValueQuantile, n: usize) -> Result<Self> {
        Self::with_nodes(gamma0, n, 64)
    }

    pub fn with_nodes(gamma0: ValueQuantile, n: usize, nodes: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("Wilson model needs n >= 2"));
        }
        if nodes < 2 {
            return Err(Error::invalid("need at least 2 Hermite nodes"));
        }
        let (ValueQuantile::Normal { scale, .. } | ValueQuantile::LogNormal { s: scale, .. }) =
            &gamma0;
        if *scale < 0.0 {
            return Err(Error::invalid("value quantile must be nondecreasing"));
        }
        Ok(Self {
            gamma0,
            n,
            hermite: gauss_hermite_normal(nodes),
        })
    }

    /// Sigma^2(Z) = 1 + sum_i 1/sigma_i^2.
    pub fn total_precision(&self, z: &Covariates) -> f64 {
        1.0 + z
            .values()
            .iter()
            .map(|v| precision_from_covariate(*v))
            .sum::<f64>()
    }

    /// Posterior mean and standard deviation of nu given the signals.
    pub fn posterior(&self, a: &[f64], z: &Covariates) -> Result<(f64, f64)> {
        if a.len() != self.n || z.n() != self.n || z.dim() != 1 {
            return Err(Error::invalid(
                "Wilson evaluation needs n signals and scalar covariates",
            ));
        }
        if let Some(k) = a.iter().position(|v| !(*v > 0.0 && *v < 1.0)) {
            return Err(Error::invalid(format!(
                "Wilson signal {} = {} must lie in (0,1)",
                k + 1,
                a[k]
            )));
        }
        let s2 = self.total_precision(z);
        let num: f64 = a
            .iter()
            .zip(z.values())
            .map(|(ai, zi)| zi * norm_quantile(*ai))
            .sum();
        Ok((num / s2, 1.0 / s2.sqrt()))
    }

    /// V(A; Z) = E[gamma0(F(nu)) | A], by Gauss-Hermite quadrature over the posterior.
    pub fn posterior_value(&self, a: &[f64], z: &Covariates) -> Result<f64> {
        let (m, sd) = self.posterior(a, z)?;
        match self.gamma0 {
            ValueQuantile::Normal { location, scale } => Ok(location + scale * m),
            _ => {
                let v = self
                    .hermite
                    .expect(|t| self.gamma0.on_normal_scale(m + sd * t));
                if !v.is_finite() {
                    return Err(Error::numerical("Wilson quadrature overflow", None));
                }
                Ok(v)
            }
        }
    }

    /// Values along an increasing sequence of Z_i with the other covariates fixed.
    pub fn limit_sequence(
        &self,
        i: usize,
        a: &[f64],
        z: &Covariates,
        zi_sequence: &[f64],
    ) -> Result<Vec<f64>> {
        zi_sequence
            .iter()
            .map(|zi| self.posterior_value(a, &z.with(i, 0, *zi)))
            .collect()
    }

    /// Extrapolate a sequence of values taken at Z_i to Z_i = infinity.
    /// The value is a smooth function of 1/Z_i, so polynomial extrapolation in 1/Z_i applies.
    pub fn extrapolate_limit(zi_sequence: &[f64], values: &[f64]) -> f64 {
        let h: Vec<f64> = zi_sequence.iter().map(|z| 1.0 / z).collect();
        let d = crate::numerics::diff::neville_to_zero(&h, values);
        d[d.len() - 1]
    }
}

impl Valuation for WilsonSpec {
    fn n(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        1
    }

    fn value(&self, _i: usize, a: &[f64], z: &Covariates) -> Result<f64> {
        // Signals at 0 or 1 are outside the model's support; use the nearest interior point.
        let clamped: Vec<f64> = a.iter().map(|v| v.clamp(1e-12, 1.0 - 1e-12)).collect();
        self.posterior_value(&clamped, z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::special::norm_cdf;

    #[test]
    fn covariate_sigma_round_trip() {
        for &s in &[0.05, 0.5, 1.0, 3.0, 40.0] {
            let z = covariate_from_sigma(s);
            assert!((sigma_from_covariate(z) - s).abs() < 1e-10 * s.max(1.0));
        }
    }

    #[test]
    fn gaussian_posterior_mean_example() {
        let spec = WilsonSpec::new(
            ValueQuantile::Normal {
                location: 0.0,
                scale: 1.0,
            },
            2,
        )
        .unwrap();
        let z0 = covariate_from_sigma(1.0);
        assert!((z0 - 2f64.sqrt()).abs() < 1e-15);
        let z = Covariates::scalar(&[z0, z0]).unwrap();
        assert!((spec.total_precision(&z) - 3.0).abs() < 1e-14);
        assert!(spec.posterior_value(&[0.5, 0.5], &z).unwrap().abs() < 1e-15);
        let v = spec.posterior_value(&[norm_cdf(1.0), 0.5], &z).unwrap();
        assert!((v - 2f64.sqrt() / 3.0).abs() < 1e-12);
    }
}
