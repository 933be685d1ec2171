//! The mixed-signal valuation model V_i(A;Z) = Phi_i[Z_1'gamma_i1(A_1), ..., Z_n'gamma_in(A_n)],
//! its example specifications and the maintained-assumption checks.

pub mod assumptions;
pub mod combiner;
pub mod copula;
pub mod covariates;
pub mod slope;
pub mod wilson;

pub use combiner::{Combiner, CombinerKind, Monomial};
pub use copula::{CopulaKind, SignalCopula};
pub use covariates::Covariates;
pub use slope::SlopeFunction;
pub use wilson::{ValueQuantile, WilsonSpec};

use crate::error::{Error, Result};

/// Anything that assigns bidder i an expected value given all signals and covariates.
pub trait Valuation: Send + Sync {
    fn n(&self) -> usize;
    fn dim(&self) -> usize;
    fn value(&self, i: usize, a: &[f64], z: &Covariates) -> Result<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedSignalModel {
    n: usize,
    dim: usize,
    /// slopes[i][j] = gamma_ij
    slopes: Vec<Vec<SlopeFunction>>,
    combiners: Vec<Combiner>,
    copula: SignalCopula,
}

impl MixedSignalModel {
    pub fn new(
        slopes: Vec<Vec<SlopeFunction>>,
        combiners: Vec<Combiner>,
        copula: SignalCopula,
    ) -> Result<Self> {
        let n = combiners.len();
        if n < 2 {
            return Err(Error::invalid("a model needs at least two bidders"));
        }
        if slopes.len() != n || slopes.iter().any(|row| row.len() != n) {
            return Err(Error::invalid("slopes must form an n x n array"));
        }
        let dim = slopes[0][0].dim();
        if slopes.iter().flatten().any(|g| g.dim() != dim) {
            return Err(Error::invalid(
                "all slopes must share the covariate dimension",
            ));
        }
        if combiners.iter().any(|c| c.arity() != n) {
            return Err(Error::invalid("combiner arity must equal n"));
        }
        if copula.n() != n {
            return Err(Error::invalid("copula dimension must equal n"));
        }
        Ok(Self {
            n,
            dim,
            slopes,
            combiners,
            copula,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn slope(&self, i: usize, j: usize) -> &SlopeFunction {
        &self.slopes[i][j]
    }

    pub fn combiner(&self, i: usize) -> &Combiner {
        &self.combiners[i]
    }

    pub fn copula(&self) -> &SignalCopula {
        &self.copula
    }

    pub fn with_copula(&self, copula: SignalCopula) -> Result<Self> {
        Self::new(self.slopes.clone(), self.combiners.clone(), copula)
    }

    fn check_point(&self, i: usize, a: &[f64], z: &Covariates) -> Result<()> {
        if i >= self.n {
            return Err(Error::invalid(format!(
                "bidder index {} out of range",
                i + 1
            )));
        }
        if a.len() != self.n {
            return Err(Error::invalid(format!(
                "expected {} signals, got {}",
                self.n,
                a.len()
            )));
        }
        if let Some(k) = a.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid(format!(
                "signal coordinate {} = {} outside [0,1]",
                k + 1,
                a[k]
            )));
        }
        if z.n() != self.n || z.dim() != self.dim {
            return Err(Error::invalid("covariate shape does not match the model"));
        }
        Ok(())
    }

    /// Mixed signals x_j = Z_j' gamma_ij(A_j).
    pub fn mixed_signals(&self, i: usize, a: &[f64], z: &Covariates) -> Vec<f64> {
        (0..self.n)
            .map(|j| self.slopes[i][j].index(z.bidder(j), a[j]))
            .collect()
    }

    /// V_i(A; Z) with domain checks.
    pub fn evaluate_valuation(&self, i: usize, a: &[f64], z: &Covariates) -> Result<f64> {
        self.check_point(i, a, z)?;
        Ok(self.combiners[i].eval(&self.mixed_signals(i, a, z)))
    }

    /// [Phi_i(./lambda), lambda Gamma_i]: the same valuation, differently scaled.
    pub fn rescale(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!(
                "scale factor must be positive, got {lambda}"
            )));
        }
        let slopes = self
            .slopes
            .iter()
            .map(|row| row.iter().map(|g| g.scaled(lambda)).collect())
            .collect();
        let combiners = self.combiners.iter().map(|c| c.rescaled(lambda)).collect();
        Self::new(slopes, combiners, self.copula.clone())
    }

    /// Per-bidder rescaling so that dPhi_i/dx_j(0) = 1 for every active j.
    pub fn normalized(&self) -> Self {
        let mut slopes = self.slopes.clone();
        let mut combiners = self.combiners.clone();
        for i in 0..self.n {
            let g0 = self.combiners[i].origin_gradient();
            let active = self.combiners[i].active_set();
            let factors: Vec<f64> = (0..self.n)
                .map(|j| {
                    if active.contains(&j) && g0[j] > 0.0 {
                        g0[j]
                    } else {
                        1.0
                    }
                })
                .collect();
            combiners[i] = self.combiners[i].coordinate_rescaled(&factors);
            for j in 0..self.n {
                slopes[i][j] = self.slopes[i][j].scaled(factors[j]);
            }
        }
        Self::new(slopes, combiners, self.copula.clone()).expect("normalization keeps shapes")
    }

    /// True when bidders are exchangeable: common own slope, common cross slope, and
    /// combiners that are permutations of one another (checked numerically).
    pub fn is_symmetric(&self) -> bool {
        let own = &self.slopes[0][0];
        let other = if self.n > 1 { &self.slopes[0][1] } else { own };
        for i in 0..self.n {
            for j in 0..self.n {
                let expect = if i == j { own } else { other };
                if &self.slopes[i][j] != expect {
                    return false;
                }
            }
        }
        let probes: Vec<Vec<f64>> = (0..5)
            .map(|k| {
                (0..self.n)
                    .map(|j| 0.1 + 0.37 * ((k * 7 + j * 3) % 11) as f64 / 11.0)
                    .collect()
            })
            .collect();
        for x in &probes {
            let base = self.combiners[0].eval(x);
            // Invariance of Phi_1 to permutations of the opponents' coordinates.
            for a in 1..self.n {
                for b in a + 1..self.n {
                    let mut y = x.clone();
                    y.swap(a, b);
                    if (self.combiners[0].eval(&y) - base).abs() > 1e-12 * (1.0 + base.abs()) {
                        return false;
                    }
                }
            }
            for i in 1..self.n {
                let mut y = x.clone();
                y.swap(0, i);
                if (self.combiners[i].eval(&y) - base).abs() > 1e-12 * (1.0 + base.abs()) {
                    return false;
                }
            }
        }
        true
    }
}

impl Valuation for MixedSignalModel {
    fn n(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, i: usize, a: &[f64], z: &Covariates) -> Result<f64> {
        self.evaluate_valuation(i, a, z)
    }
}

/// Ready-made specifications used by tests, fixtures and the CLI.
pub mod examples {
    use super::*;

    /// Uniform independent private values: V_i = A_i.
    pub fn uniform_ipv(n: usize) -> MixedSignalModel {
        symmetric(
            n,
            (0..n).map(|j| if j == 0 { 1.0 } else { 0.0 }).collect(),
            SlopeFunction::identity(),
            SlopeFunction::identity(),
            SignalCopula::independence(n),
        )
    }

    /// Symmetric additive model: Phi_i = sum_j x_j, own slope `own`, cross slope `other`.
    pub fn additive_symmetric(
        n: usize,
        own: SlopeFunction,
        other: SlopeFunction,
        copula: SignalCopula,
    ) -> MixedSignalModel {
        symmetric(n, vec![1.0; n], own, other, copula)
    }

    /// Symmetric additive family with weights (own weight first) rotated per bidder.
    pub fn symmetric(
        n: usize,
        weights_own_first: Vec<f64>,
        own: SlopeFunction,
        other: SlopeFunction,
        copula: SignalCopula,
    ) -> MixedSignalModel {
        let combiners = (0..n)
            .map(|i| {
                let w: Vec<f64> = (0..n)
                    .map(|j| {
                        if j == i {
                            weights_own_first[0]
                        } else {
                            weights_own_first[1.min(n - 1)]
                        }
                    })
                    .collect();
                Combiner::additive(w)
            })
            .collect();
        let slopes = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { own.clone() } else { other.clone() })
                    .collect()
            })
            .collect();
        MixedSignalModel::new(slopes, combiners, copula).expect("well-formed symmetric model")
    }

    /// Resale example: Phi_i = max_j pi_j x_j, smoothed when `sharpness` is given.
    pub fn resale(
        n: usize,
        weights: Vec<f64>,
        slope: SlopeFunction,
        sharpness: Option<f64>,
        copula: SignalCopula,
    ) -> Result<MixedSignalModel> {
        let combiners = (0..n)
            .map(|_| match sharpness {
                Some(k) => Combiner::smooth_max(weights.clone(), k),
                None => Combiner::hard_max(weights.clone()),
            })
            .collect::<Result<Vec<_>>>()?;
        let slopes = vec![vec![slope; n]; n];
        MixedSignalModel::new(slopes, combiners, copula)
    }

    /// Model whose bidder-1 primitives are (phi, gamma_1j); the other bidders mirror bidder 1.
    pub fn from_first_bidder(
        phi: Combiner,
        slopes: Vec<SlopeFunction>,
        copula: SignalCopula,
    ) -> Result<MixedSignalModel> {
        let n = slopes.len();
        let mut combiners = Vec::with_capacity(n);
        let mut rows = Vec::with_capacity(n);
        for i in 0..n {
            // Bidder i sees the roles of coordinates 0 and i swapped.
            let perm: Vec<usize> = (0..n)
                .map(|j| {
                    if j == 0 {
                        i
                    } else if j == i {
                        0
                    } else {
                        j
                    }
                })
                .collect();
            let row: Vec<SlopeFunction> = (0..n).map(|j| slopes[perm[j]].clone()).collect();
            rows.push(row);
            combiners.push(permuted_combiner(&phi, &perm)?);
        }
        MixedSignalModel::new(rows, combiners, copula)
    }

    fn permuted_combiner(phi: &Combiner, perm: &[usize]) -> Result<Combiner> {
        let kind = match &phi.kind {
            CombinerKind::Additive { weights, intercept } => CombinerKind::Additive {
                weights: perm.iter().map(|&p| weights[p]).collect(),
                intercept: *intercept,
            },
            CombinerKind::SmoothMax { weights, sharpness } => CombinerKind::SmoothMax {
                weights: perm.iter().map(|&p| weights[p]).collect(),
                sharpness: *sharpness,
            },
            CombinerKind::HardMax { weights } => CombinerKind::HardMax {
                weights: perm.iter().map(|&p| weights[p]).collect(),
            },
            CombinerKind::Polynomial { n, terms } => CombinerKind::Polynomial {
                n: *n,
                terms: terms
                    .iter()
                    .map(|t| Monomial {
                        coef: t.coef,
                        powers: perm.iter().map(|&p| t.powers[p]).collect(),
                    })
                    .collect(),
            },
        };
        let mut c = Combiner::new(kind)?;
        c.scale = perm.iter().map(|&p| phi.scale[p]).collect();
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn additive_identity_example() {
        let m = examples::additive_symmetric(
            2,
            SlopeFunction::identity(),
            SlopeFunction::identity(),
            SignalCopula::independence(2),
        );
        let z = Covariates::scalar(&[1.0, 1.0]).unwrap();
        assert_eq!(m.evaluate_valuation(0, &[0.5, 0.25], &z).unwrap(), 0.75);
        assert!(m.is_symmetric());
    }

    #[test]
    fn smoothed_max_example() {
        let m = examples::resale(
            2,
            vec![1.0, 1.0],
            SlopeFunction::identity(),
            Some(60.0),
            SignalCopula::independence(2),
        )
        .unwrap();
        let z = Covariates::scalar(&[1.0, 1.0]).unwrap();
        let v = m.evaluate_valuation(0, &[0.5, 0.25], &z).unwrap();
        assert!((v - 0.5).abs() < 1e-6);
    }

    #[test]
    fn initial_value_case() {
        let mut phi = Combiner::additive(vec![1.0, 1.0]);
        phi.kind = CombinerKind::Additive {
            weights: vec![1.0, 1.0],
            intercept: 0.7,
        };
        let m = examples::from_first_bidder(
            phi,
            vec![SlopeFunction::identity(), SlopeFunction::identity()],
            SignalCopula::independence(2),
        )
        .unwrap();
        let z = Covariates::scalar(&[2.0, 3.0]).unwrap();
        assert_eq!(m.evaluate_valuation(0, &[0.0, 0.0], &z).unwrap(), 0.7);
    }

    #[test]
    fn domain_errors_report_coordinates() {
        let m = examples::uniform_ipv(2);
        let z = Covariates::scalar(&[1.0, 1.0]).unwrap();
        let e = m.evaluate_valuation(0, &[0.5, 1.5], &z).unwrap_err();
        assert!(format!("{e}").contains("coordinate 2"));
        assert!(Covariates::scalar(&[1.0, -1.0]).is_err());
    }

    #[test]
    fn rescale_rejects_nonpositive() {
        assert!(examples::uniform_ipv(2).rescale(0.0).is_err());
        assert!(examples::uniform_ipv(2).rescale(-1.0).is_err());
    }

    #[test]
    fn mirrored_bidders_are_consistent() {
        let m = examples::from_first_bidder(
            Combiner::bilinear_interaction(),
            vec![
                SlopeFunction::linear(0.5, 1.0),
                SlopeFunction::linear(0.4, 1.0),
            ],
            SignalCopula::independence(2),
        )
        .unwrap();
        let z = Covariates::scalar(&[1.3, 0.7]).unwrap();
        let v1 = m.evaluate_valuation(0, &[0.2, 0.9], &z).unwrap();
        let v2 = m
            .evaluate_valuation(1, &[0.9, 0.2], &z.permuted(&[1, 0]))
            .unwrap();
        assert!((v1 - v2).abs() < 1e-14);
    }
}
