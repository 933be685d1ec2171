//! Exact auction field computed from the generating model and strategy profile.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use super::AuctionField;
use crate::error::{Error, Result};
use crate::model::{Covariates, MixedSignalModel, WilsonSpec};
use crate::strategy::profile::ProfileKind;
use crate::strategy::{
    frontier_value, frontier_value_density, frontier_value_pair, omega_ratio, slice_for, BaseSpec,
    ProfileSlice, SignalQuadrature, SolveOptions, StrategyProfile,
};

#[derive(Debug, Clone)]
pub enum OracleValuation {
    Model(MixedSignalModel),
    /// Common value with Gaussian noise; only two-bidder frontier values are available.
    Wilson(WilsonSpec),
}

pub struct OracleField {
    valuation: OracleValuation,
    profile: StrategyProfile,
    i: usize,
    opts: SolveOptions,
    cache: Mutex<HashMap<Vec<u64>, Arc<ProfileSlice>>>,
}

impl OracleField {
    pub fn new(valuation: OracleValuation, profile: StrategyProfile, i: usize) -> Result<Self> {
        let n = match &valuation {
            OracleValuation::Model(m) => m.n(),
            OracleValuation::Wilson(w) => w.n,
        };
        if profile.n() != n {
            return Err(Error::invalid("profile and valuation disagree on n"));
        }
        if i >= n {
            return Err(Error::invalid("bidder index out of range"));
        }
        if let (OracleValuation::Wilson(_), true) = (&valuation, n != 2) {
            return Err(Error::Unsupported(
                "Wilson oracle field needs two bidders".into(),
            ));
        }
        Ok(Self {
            valuation,
            profile,
            i,
            opts: SolveOptions::default(),
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn from_model(model: MixedSignalModel, profile: StrategyProfile, i: usize) -> Result<Self> {
        Self::new(OracleValuation::Model(model), profile, i)
    }

    pub fn with_options(mut self, opts: SolveOptions) -> Self {
        self.opts = opts;
        self
    }

    pub fn profile(&self) -> &StrategyProfile {
        &self.profile
    }

    pub fn model(&self) -> Option<&MixedSignalModel> {
        match &self.valuation {
            OracleValuation::Model(m) => Some(m),
            _ => None,
        }
    }

    fn quad(&self) -> &SignalQuadrature {
        &self.opts.quadrature
    }

    fn require_model(&self) -> Result<&MixedSignalModel> {
        self.model().ok_or_else(|| {
            Error::Unsupported("quantity needs a signal copula; Wilson oracle has none".into())
        })
    }

    pub fn slice(&self, z: &Covariates) -> Result<Arc<ProfileSlice>> {
        if !self.profile.needs_model() {
            return Ok(Arc::new(self.profile.slice(z)?));
        }
        let key: Vec<u64> = z.values().iter().map(|v| v.to_bits()).collect();
        if let Some(s) = self.cache.lock().unwrap().get(&key) {
            return Ok(s.clone());
        }
        let s = Arc::new(slice_for(
            &self.profile,
            self.require_model()?,
            z,
            &self.opts,
        )?);
        self.cache.lock().unwrap().insert(key, s.clone());
        Ok(s)
    }

    /// U computed through the bids, B + B' Omega.
    pub fn u_from_bids(&self, alpha: f64, z: &Covariates) -> Result<f64> {
        let i = self.i;
        Ok(self.bid(i, alpha, z)? + self.bid_deriv(i, alpha, z)? * self.omega(alpha, z)?)
    }

    /// Slice used for G_j B_i only. With common affine maps G_j B_i does not depend on the
    /// base, so a linear base stands in for a best-response one.
    fn frontier_slice(&self, z: &Covariates) -> Result<Arc<ProfileSlice>> {
        if self.profile.needs_model() {
            if let ProfileKind::Synthetic { warps, affine, .. } = self.profile.kind() {
                if affine.iter().any(|m| *m != affine[0]) {
                    return self.slice(z);
                }
                let lin = StrategyProfile::synthetic_affine(
                    BaseSpec::Linear { lo: 0.0, hi: 1.0 },
                    warps.clone(),
                    affine.clone(),
                    z.dim(),
                )?;
                return Ok(Arc::new(lin.slice(z)?));
            }
        }
        self.slice(z)
    }
}

impl AuctionField for OracleField {
    fn n(&self) -> usize {
        self.profile.n()
    }

    fn dim(&self) -> usize {
        match &self.valuation {
            OracleValuation::Model(m) => m.dim(),
            OracleValuation::Wilson(_) => 1,
        }
    }

    fn bidder(&self) -> usize {
        self.i
    }

    fn bid(&self, j: usize, alpha: f64, z: &Covariates) -> Result<f64> {
        Ok(self.slice(z)?.bid(j, alpha))
    }

    fn bid_deriv(&self, j: usize, alpha: f64, z: &Covariates) -> Result<f64> {
        Ok(self.slice(z)?.bid_deriv(j, alpha))
    }

    fn level(&self, j: usize, bid: f64, z: &Covariates) -> Result<f64> {
        Ok(self.slice(z)?.level(j, bid))
    }

    fn gb(&self, j: usize, alpha: f64, z: &Covariates) -> Result<f64> {
        Ok(self.frontier_slice(z)?.gb(j, self.i, alpha))
    }

    fn gb_deriv(&self, j: usize, alpha: f64, z: &Covariates) -> Result<f64> {
        Ok(self.frontier_slice(z)?.gb_deriv(j, self.i, alpha))
    }

    fn gb_zgrad(&self, j: usize, alpha: f64, z: &Covariates) -> Result<Vec<f64>> {
        match self.profile.gb_zgrad(j, self.i, alpha, z) {
            Some(g) => Ok(g),
            None => super::zgrad(|zz| self.gb(j, alpha, zz), z),
        }
    }

    fn omega(&self, alpha: f64, z: &Covariates) -> Result<f64> {
        omega_ratio(
            self.require_model()?,
            &*self.frontier_slice(z)?,
            self.i,
            alpha,
        )
    }

    fn u(&self, alpha: f64, z: &Covariates) -> Result<f64> {
        let s = self.frontier_slice(z)?;
        match &self.valuation {
            OracleValuation::Wilson(w) => frontier_value_pair(w, &s, self.i, alpha),
            OracleValuation::Model(m) => frontier_value(m, &s, self.i, alpha, self.quad()),
        }
    }

    fn w(&self, alpha: f64, z: &Covariates) -> Result<f64> {
        let s = self.frontier_slice(z)?;
        frontier_value_density(self.require_model()?, &s, self.i, alpha, self.quad())
    }

    fn signal_density(&self, a: &[f64], z: &Covariates) -> Result<f64> {
        Ok(self.require_model()?.copula().density(a, z))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{examples, Combiner, SignalCopula, SlopeFunction};

    #[test]
    fn uniform_ipv_frontier_is_alpha() {
        let m = examples::uniform_ipv(2);
        let p = StrategyProfile::symmetric_linear(2, 0.01, 0.5, 1).unwrap();
        let f = OracleField::from_model(m, p, 0).unwrap();
        let z = Covariates::scalar(&[1.0, 1.0]).unwrap();
        for &a in &[0.0, 0.3, 1.0] {
            assert!((f.u(a, &z).unwrap() - a).abs() < 1e-15);
            assert_eq!(f.gb(1, a, &z).unwrap(), a);
        }
    }

    #[test]
    fn best_response_base_satisfies_b2u() {
        let m = examples::from_first_bidder(
            Combiner::bilinear_interaction(),
            vec![
                SlopeFunction::linear(0.5, 1.0),
                SlopeFunction::linear(0.4, 1.0),
            ],
            SignalCopula::independence(2),
        )
        .unwrap();
        let p = StrategyProfile::canonical(2, BaseSpec::BestResponse).unwrap();
        let f = OracleField::from_model(m, p, 0).unwrap();
        let z = Covariates::scalar(&[1.0, 1.6]).unwrap();
        for k in 1..20 {
            let a = k as f64 / 20.0;
            let direct = f.u(a, &z).unwrap();
            let via = f.u_from_bids(a, &z).unwrap();
            assert!((direct - via).abs() < 1e-10, "a={a} {direct} {via}");
        }
    }

    #[test]
    fn canonical_gradient_matches_finite_differences() {
        let m = examples::uniform_ipv(2);
        let p = StrategyProfile::canonical(2, BaseSpec::Linear { lo: 0.1, hi: 0.9 }).unwrap();
        let f = OracleField::from_model(m, p, 0).unwrap();
        let z = Covariates::scalar(&[1.0, 1.3]).unwrap();
        for &a in &[0.1, 0.5, 0.8] {
            let an = f.gb_zgrad(1, a, &z).unwrap();
            let fd = super::super::zgrad(|zz| f.gb(1, a, zz), &z).unwrap();
            for (x, y) in an.iter().zip(&fd) {
                assert!((x - y).abs() <= 1e-5f64.max(1e-3 * x.abs()));
            }
        }
    }
}
