//! The auction field: quantities identified from bids, seen from bidder i.
//!
//! Two implementations share one interface: an oracle computed from the model and a
//! strategy profile, and an empirical one estimated from a bid dataset.

pub mod diagnostics;
pub mod empirical;
pub mod oracle;

pub use diagnostics::{
    rank_condition_report, strategy_condition_tests, RankOptions, RankPoint, RankReport,
    RankStatus, StrategyConditionReport, SupportFinding,
};
pub use empirical::{empirical_field, EmpiricalField, SmootherConfig};
pub use oracle::{OracleField, OracleValuation};

use crate::error::{Error, Result};
use crate::model::Covariates;
use crate::numerics::diff::{central5, unit_interval_deriv};

/// Relative step for covariate finite differences.
pub const Z_STEP: f64 = 1e-3;

pub trait AuctionField: Send + Sync {
    fn n(&self) -> usize;
    fn dim(&self) -> usize;
    /// The bidder i the field is built for (0-based).
    fn bidder(&self) -> usize;

    /// B_j(alpha | Z).
    fn bid(&self, j: usize, alpha: f64, z: &Covariates) -> Result<f64>;
    /// dB_j(alpha | Z) / d alpha.
    fn bid_deriv(&self, j: usize, alpha: f64, z: &Covariates) -> Result<f64>;
    /// G_j(b | Z).
    fn level(&self, j: usize, bid: f64, z: &Covariates) -> Result<f64>;
    /// G_j B_i(alpha | Z).
    fn gb(&self, j: usize, alpha: f64, z: &Covariates) -> Result<f64>;
    /// g_j b_i(alpha | Z) = d G_j B_i / d alpha.
    fn gb_deriv(&self, j: usize, alpha: f64, z: &Covariates) -> Result<f64>;
    /// d G_j B_i(alpha | Z) / d vec(Z).
    fn gb_zgrad(&self, j: usize, alpha: f64, z: &Covariates) -> Result<Vec<f64>> {
        zgrad(|zz| self.gb(j, alpha, zz), z)
    }
    /// Omega_i(alpha | Z).
    fn omega(&self, alpha: f64, z: &Covariates) -> Result<f64>;
    /// U_i(alpha | Z).
    fn u(&self, alpha: f64, z: &Covariates) -> Result<f64>;
    /// dU_i / d vec(Z).
    fn u_zgrad(&self, alpha: f64, z: &Covariates) -> Result<Vec<f64>> {
        zgrad(|zz| self.u(alpha, zz), z)
    }
    /// dU_i / d alpha.
    fn u_alpha(&self, alpha: f64, z: &Covariates) -> Result<f64> {
        let mut err = None;
        let d = unit_interval_deriv(
            |a| match self.u(a, z) {
                Ok(v) => v,
                Err(e) => {
                    err = Some(e);
                    f64::NAN
                }
            },
            alpha,
            1e-3,
        );
        match err {
            Some(e) => Err(e),
            None => Ok(d),
        }
    }
    /// W(alpha | Z), the value density along the winning frontier (n >= 3 route).
    fn w(&self, _alpha: f64, _z: &Covariates) -> Result<f64> {
        Err(Error::Unsupported("frontier value density".into()))
    }
    /// Joint density of the n signals given Z.
    fn signal_density(&self, a: &[f64], z: &Covariates) -> Result<f64>;
}

/// Five-point central differences in every coordinate of vec(Z), with step
/// proportional to the coordinate so that perturbed points stay positive.
pub fn zgrad<F: Fn(&Covariates) -> Result<f64>>(f: F, z: &Covariates) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(z.values().len());
    for j in 0..z.n() {
        for d in 0..z.dim() {
            let z0 = z.get(j, d);
            let h = Z_STEP * z0;
            let mut err = None;
            let g = central5(
                |v| match f(&z.with(j, d, v)) {
                    Ok(x) => x,
                    Err(e) => {
                        err = Some(e);
                        f64::NAN
                    }
                },
                z0,
                h,
            );
            if let Some(e) = err {
                return Err(e);
            }
            out.push(g);
        }
    }
    Ok(out)
}

/// Z_k' d/dZ_k of a gradient over vec(Z): sum over the D components of bidder k.
pub fn directional(grad: &[f64], z: &Covariates, k: usize) -> f64 {
    let dim = z.dim();
    (0..dim).map(|d| z.get(k, d) * grad[k * dim + d]).sum()
}
