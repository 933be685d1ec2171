//! Rank condition on the covariate responses of G_j B_i, and checks on the bid supports.

use nalgebra::DMatrix;
use serde::Serialize;

use super::{directional, AuctionField};
use crate::error::Result;
use crate::model::Covariates;
use crate::numerics::diff::neville_to_zero;

#[derive(Debug, Clone, Copy)]
pub struct RankOptions {
    /// Smallest singular value must exceed this fraction of the matrix 2-norm.
    pub relative_threshold: f64,
    /// ... and this absolute floor.
    pub absolute_floor: f64,
    /// Offsets used to extrapolate the matrix to alpha = 0 and alpha = 1.
    pub endpoint_offsets: [f64; 4],
}

impl Default for RankOptions {
    fn default() -> Self {
        Self {
            relative_threshold: 1e-3,
            absolute_floor: 1e-8,
            endpoint_offsets: [0.04, 0.02, 0.01, 0.005],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RankStatus {
    Pass,
    Fail,
    /// The candidate set excludes every active coordinate but the bidder's own.
    NotBinding,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankPoint {
    pub alpha: f64,
    pub z: Vec<f64>,
    pub min_singular_value: f64,
    pub norm: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RankReport {
    pub status: RankStatus,
    /// 0-based bidders whose covariates and signals enter the matrix.
    pub candidate: Vec<usize>,
    pub points: Vec<RankPoint>,
    pub min_singular_value: f64,
}

impl RankReport {
    pub fn first_failure(&self) -> Option<&RankPoint> {
        self.points.iter().find(|p| !p.passed)
    }
}

/// Matrix with entries Z_k' d_{Z_k} G_j B_i(alpha | Z) / (alpha (1 - alpha)), j, k in `candidate`.
pub fn rank_matrix<F: AuctionField + ?Sized>(
    field: &F,
    candidate: &[usize],
    alpha: f64,
    z: &Covariates,
) -> Result<DMatrix<f64>> {
    let m = candidate.len();
    let scale = alpha * (1.0 - alpha);
    let mut out = DMatrix::zeros(m, m);
    for (r, &j) in candidate.iter().enumerate() {
        let g = field.gb_zgrad(j, alpha, z)?;
        for (c, &k) in candidate.iter().enumerate() {
            out[(r, c)] = directional(&g, z, k) / scale;
        }
    }
    Ok(out)
}

/// The rank matrix, extrapolated entrywise when alpha sits at an end of [0, 1].
pub fn rank_matrix_limit<F: AuctionField + ?Sized>(
    field: &F,
    candidate: &[usize],
    alpha: f64,
    z: &Covariates,
    opts: &RankOptions,
) -> Result<DMatrix<f64>> {
    let edge = if alpha <= 1e-12 {
        Some(0.0)
    } else if alpha >= 1.0 - 1e-12 {
        Some(1.0)
    } else {
        None
    };
    let Some(e) = edge else {
        return rank_matrix(field, candidate, alpha, z);
    };
    let hs = opts.endpoint_offsets;
    let mats = hs
        .iter()
        .map(|&h| rank_matrix(field, candidate, if e == 0.0 { h } else { 1.0 - h }, z))
        .collect::<Result<Vec<_>>>()?;
    let m = candidate.len();
    let mut out = DMatrix::zeros(m, m);
    for r in 0..m {
        for c in 0..m {
            let v: Vec<f64> = mats.iter().map(|x| x[(r, c)]).collect();
            out[(r, c)] = *neville_to_zero(&hs, &v).last().unwrap();
        }
    }
    Ok(out)
}

/// Evaluate the rank condition on every (alpha, Z) pair of the grid. `active` is the
/// active set of bidder i's combiner when known.
pub fn rank_condition_report<F: AuctionField + ?Sized>(
    field: &F,
    candidate: &[usize],
    active: Option<&[usize]>,
    alphas: &[f64],
    zs: &[Covariates],
    opts: &RankOptions,
) -> Result<RankReport> {
    let i = field.bidder();
    let binding = match active {
        Some(act) => act.iter().any(|&j| j != i),
        None => true,
    };
    let mut points = Vec::with_capacity(alphas.len() * zs.len());
    let mut min_sv = f64::INFINITY;
    for z in zs {
        for &a in alphas {
            let m = rank_matrix_limit(field, candidate, a, z, opts)?;
            let sv = m.clone().singular_values();
            let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
            let norm = sv.iter().cloned().fold(0.0, f64::max);
            let passed = smin.is_finite()
                && smin > opts.absolute_floor
                && smin > opts.relative_threshold * norm;
            min_sv = min_sv.min(smin);
            points.push(RankPoint {
                alpha: a,
                z: z.values().to_vec(),
                min_singular_value: smin,
                norm,
                passed,
            });
        }
    }
    let status = if !binding {
        RankStatus::NotBinding
    } else if points.iter().all(|p| p.passed) {
        RankStatus::Pass
    } else {
        RankStatus::Fail
    };
    Ok(RankReport {
        status,
        candidate: candidate.to_vec(),
        points,
        min_singular_value: min_sv,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SupportFinding {
    pub z: Vec<f64>,
    /// B_j(0 | Z) per bidder.
    pub lower: Vec<f64>,
    /// B_j(1 | Z) per bidder.
    pub upper: Vec<f64>,
    pub common_upper: bool,
    pub common_lower: bool,
    /// Bidders whose highest bid falls short of the highest bid overall.
    pub short_upper: Vec<usize>,
    /// alpha_bar_j = G_j(max_k B_k(0 | Z)): signals below it never win.
    pub alpha_bar: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StrategyConditionReport {
    pub tolerance: f64,
    pub findings: Vec<SupportFinding>,
}

impl StrategyConditionReport {
    pub fn common_upper(&self) -> bool {
        self.findings.iter().all(|f| f.common_upper)
    }

    pub fn common_lower(&self) -> bool {
        self.findings.iter().all(|f| f.common_lower)
    }

    pub fn passed(&self) -> bool {
        self.common_upper() && self.common_lower()
    }
}

/// Compare bid-support endpoints across bidders at each covariate point.
pub fn strategy_condition_tests<F: AuctionField + ?Sized>(
    field: &F,
    zs: &[Covariates],
    tolerance: f64,
) -> Result<StrategyConditionReport> {
    let n = field.n();
    let mut findings = Vec::with_capacity(zs.len());
    for z in zs {
        let lower = (0..n)
            .map(|j| field.bid(j, 0.0, z))
            .collect::<Result<Vec<_>>>()?;
        let upper = (0..n)
            .map(|j| field.bid(j, 1.0, z))
            .collect::<Result<Vec<_>>>()?;
        let top = upper.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let floor = lower.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let bottom = lower.iter().cloned().fold(f64::INFINITY, f64::min);
        let short_upper: Vec<usize> = (0..n).filter(|&j| upper[j] < top - tolerance).collect();
        let alpha_bar = (0..n)
            .map(|j| {
                if lower[j] >= floor - tolerance {
                    Ok(0.0)
                } else {
                    field.level(j, floor, z)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        findings.push(SupportFinding {
            z: z.values().to_vec(),
            common_upper: short_upper.is_empty(),
            common_lower: floor - bottom <= tolerance,
            lower,
            upper,
            short_upper,
            alpha_bar,
        });
    }
    Ok(StrategyConditionReport {
        tolerance,
        findings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::OracleField;
    use crate::model::examples;
    use crate::strategy::{BaseSpec, StrategyProfile, Warp};

    fn z(a: f64, b: f64) -> Covariates {
        Covariates::scalar(&[a, b]).unwrap()
    }

    #[test]
    fn canonical_matrix_is_delta_jacobian() {
        let p = StrategyProfile::canonical(2, BaseSpec::Linear { lo: 0.1, hi: 0.9 }).unwrap();
        let f = OracleField::from_model(examples::uniform_ipv(2), p, 0).unwrap();
        let zz = z(1.0, 1.4);
        let want = 1.4 * 0.5 / (0.4f64).cosh().powi(2);
        for &a in &[0.0, 0.3, 0.7, 1.0] {
            let m = rank_matrix_limit(&f, &[1], a, &zz, &RankOptions::default()).unwrap();
            assert!(
                (m[(0, 0)] - want).abs() < 1e-8,
                "alpha {a}: {} vs {want}",
                m[(0, 0)]
            );
        }
    }

    #[test]
    fn symmetric_profile_fails_and_private_values_do_not_bind() {
        let p = StrategyProfile::symmetric_linear(2, 0.0, 1.0, 1).unwrap();
        let f = OracleField::from_model(examples::uniform_ipv(2), p, 0).unwrap();
        let grid = [0.0, 0.5, 1.0];
        let zs = [z(1.0, 1.5)];
        let r = rank_condition_report(&f, &[1], None, &grid, &zs, &RankOptions::default()).unwrap();
        assert_eq!(r.status, RankStatus::Fail);
        assert!(r.min_singular_value < 1e-8);
        let r = rank_condition_report(&f, &[1], Some(&[0]), &grid, &zs, &RankOptions::default())
            .unwrap();
        assert_eq!(r.status, RankStatus::NotBinding);
    }

    #[test]
    fn raised_floor_is_flagged() {
        let p = StrategyProfile::synthetic_affine(
            BaseSpec::Linear { lo: 0.0, hi: 1.0 },
            vec![Warp::Identity, Warp::Identity],
            vec![(0.0, 1.0), (0.2, 0.8)],
            1,
        )
        .unwrap();
        let f = OracleField::from_model(examples::uniform_ipv(2), p, 0).unwrap();
        let r = strategy_condition_tests(&f, &[z(1.0, 1.0)], 1e-9).unwrap();
        let fd = &r.findings[0];
        assert!(fd.common_upper && !fd.common_lower);
        assert!((fd.alpha_bar[0] - 0.2).abs() < 1e-9);
        assert_eq!(fd.alpha_bar[1], 0.0);

        let p = StrategyProfile::synthetic_affine(
            BaseSpec::Linear { lo: 0.0, hi: 1.0 },
            vec![Warp::Identity, Warp::Identity],
            vec![(0.0, 1.0), (0.0, 0.9)],
            1,
        )
        .unwrap();
        let f = OracleField::from_model(examples::uniform_ipv(2), p, 0).unwrap();
        let r = strategy_condition_tests(&f, &[z(1.0, 1.0)], 1e-9).unwrap();
        assert_eq!(r.findings[0].short_upper, vec![1]);
    }
}
