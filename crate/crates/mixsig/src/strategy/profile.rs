//! Strategy profiles s_j(. ; Z) and their per-covariate slices.
//!
//! Synthetic profiles are built as s_j = c_j + m_j * base(q_j^{-1}(alpha; Z)) with
//! q_1 the identity, so G_j B_1 = q_j exactly. Solved symmetric equilibria are stored
//! as tables at a finite set of covariate points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Covariates;
use crate::numerics::interp::CubicHermite;

/// delta(Z) = scale * tanh(weights . vec(Z) + offset), vec(Z) bidder-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaFn {
    pub scale: f64,
    pub weights: Vec<f64>,
    pub offset: f64,
}

impl DeltaFn {
    pub fn eval(&self, z: &Covariates) -> f64 {
        self.scale * self.arg(z).tanh()
    }

    fn arg(&self, z: &Covariates) -> f64 {
        self.offset
            + self
                .weights
                .iter()
                .zip(z.values())
                .map(|(w, v)| w * v)
                .sum::<f64>()
    }

    /// Gradient with respect to vec(Z).
    pub fn gradient(&self, z: &Covariates) -> Vec<f64> {
        let t = self.arg(z).tanh();
        let s = self.scale * (1.0 - t * t);
        self.weights.iter().map(|w| s * w).collect()
    }

    /// delta = tanh(Z_k - Z_1) / 2 for scalar covariates, the canonical asymmetry.
    pub fn canonical(n: usize, k: usize) -> Self {
        let mut weights = vec![0.0; n];
        weights[0] = -1.0;
        weights[k] = 1.0;
        Self {
            scale: 0.5,
            weights,
            offset: 0.0,
        }
    }
}

/// Monotone reparameterization q(alpha; Z) of [0,1] onto itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Warp {
    Identity,
    /// alpha + delta(Z) alpha (1 - alpha), |delta| < 1.
    Quadratic {
        delta: DeltaFn,
    },
    /// alpha^exponent.
    Power {
        exponent: f64,
    },
}

impl Warp {
    fn validate(&self, nd: usize) -> Result<()> {
        match self {
            Warp::Identity => Ok(()),
            Warp::Quadratic { delta } => {
                if !(delta.scale.abs() < 1.0) {
                    return Err(Error::invalid(format!(
                        "quadratic warp needs |delta| < 1, got scale {}",
                        delta.scale
                    )));
                }
                if delta.weights.len() != nd {
                    return Err(Error::invalid("delta weights must have n*D entries"));
                }
                Ok(())
            }
            Warp::Power { exponent } if !(*exponent > 0.0) => {
                Err(Error::invalid("power warp exponent must be positive"))
            }
            Warp::Power { .. } => Ok(()),
        }
    }

    pub fn at(&self, z: &Covariates) -> WarpAt {
        match self {
            Warp::Identity => WarpAt::Quadratic(0.0),
            Warp::Quadratic { delta } => WarpAt::Quadratic(delta.eval(z)),
            Warp::Power { exponent } => WarpAt::Power(*exponent),
        }
    }

    /// d q(alpha; Z) / d vec(Z).
    pub fn zgrad(&self, alpha: f64, z: &Covariates) -> Vec<f64> {
        match self {
            Warp::Quadratic { delta } => {
                let f = alpha * (1.0 - alpha);
                delta.gradient(z).into_iter().map(|g| g * f).collect()
            }
            _ => vec![0.0; z.values().len()],
        }
    }
}

/// A warp with the covariate already plugged in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WarpAt {
    Quadratic(f64),
    Power(f64),
}

impl WarpAt {
    pub fn q(&self, a: f64) -> f64 {
        match *self {
            WarpAt::Quadratic(d) => a + d * a * (1.0 - a),
            WarpAt::Power(p) => a.max(0.0).powf(p),
        }
    }

    pub fn dq(&self, a: f64) -> f64 {
        match *self {
            WarpAt::Quadratic(d) => 1.0 + d * (1.0 - 2.0 * a),
            WarpAt::Power(p) => p * a.max(0.0).powf(p - 1.0),
        }
    }

    pub fn inv(&self, b: f64) -> f64 {
        let b = b.clamp(0.0, 1.0);
        match *self {
            WarpAt::Quadratic(d) => {
                if d == 0.0 {
                    b
                } else {
                    let e = 1.0 + d;
                    2.0 * b / (e + (e * e - 4.0 * d * b).sqrt())
                }
            }
            WarpAt::Power(p) => b.powf(1.0 / p),
        }
    }
}

/// The common base bid function of a synthetic profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseSpec {
    /// lo + (hi - lo) alpha.
    Linear { lo: f64, hi: f64 },
    /// Bidder 1's best response to the warped opponents, solved per covariate point.
    BestResponse,
}

/// Bid function of one bidder at a fixed covariate point.
#[derive(Debug, Clone)]
pub enum BidCurve {
    /// c + m * base(q^{-1}(alpha)).
    Composed {
        base: BaseCurve,
        warp: WarpAt,
        shift: f64,
        stretch: f64,
    },
    Table(CubicHermite),
}

#[derive(Debug, Clone)]
pub enum BaseCurve {
    Linear { lo: f64, hi: f64 },
    Table(CubicHermite),
}

impl BaseCurve {
    fn eval(&self, a: f64) -> f64 {
        match self {
            BaseCurve::Linear { lo, hi } => lo + (hi - lo) * a,
            BaseCurve::Table(t) => t.eval(a),
        }
    }

    fn deriv(&self, a: f64) -> f64 {
        match self {
            BaseCurve::Linear { lo, hi } => hi - lo,
            BaseCurve::Table(t) => t.deriv(a),
        }
    }

    fn inverse(&self, b: f64) -> f64 {
        match self {
            BaseCurve::Linear { lo, hi } => ((b - lo) / (hi - lo)).clamp(0.0, 1.0),
            BaseCurve::Table(t) => t.inverse(b),
        }
    }
}

impl BidCurve {
    pub fn eval(&self, a: f64) -> f64 {
        match self {
            BidCurve::Composed {
                base,
                warp,
                shift,
                stretch,
            } => shift + stretch * base.eval(warp.inv(a)),
            BidCurve::Table(t) => t.eval(a),
        }
    }

    pub fn deriv(&self, a: f64) -> f64 {
        match self {
            BidCurve::Composed {
                base,
                warp,
                stretch,
                ..
            } => {
                let b = warp.inv(a);
                stretch * base.deriv(b) / warp.dq(b)
            }
            BidCurve::Table(t) => t.deriv(a),
        }
    }

    /// Quantile level of a bid, clamped to [0, 1] outside the support.
    pub fn level(&self, bid: f64) -> f64 {
        match self {
            BidCurve::Composed {
                base,
                warp,
                shift,
                stretch,
            } => warp
                .q(base.inverse((bid - shift) / stretch))
                .clamp(0.0, 1.0),
            BidCurve::Table(t) => t.inverse(bid).clamp(0.0, 1.0),
        }
    }
}

/// All bid functions at one covariate point.
#[derive(Debug, Clone)]
pub struct ProfileSlice {
    pub z: Covariates,
    pub curves: Vec<BidCurve>,
}

impl ProfileSlice {
    pub fn n(&self) -> usize {
        self.curves.len()
    }

    pub fn bid(&self, j: usize, a: f64) -> f64 {
        self.curves[j].eval(a)
    }

    pub fn bid_deriv(&self, j: usize, a: f64) -> f64 {
        self.curves[j].deriv(a)
    }

    /// G_j(b | Z).
    pub fn level(&self, j: usize, bid: f64) -> f64 {
        self.curves[j].level(bid)
    }

    fn same_base(&self, j: usize, i: usize) -> Option<(WarpAt, WarpAt)> {
        match (&self.curves[j], &self.curves[i]) {
            (
                BidCurve::Composed {
                    warp: wj,
                    shift: cj,
                    stretch: mj,
                    ..
                },
                BidCurve::Composed {
                    warp: wi,
                    shift: ci,
                    stretch: mi,
                    ..
                },
            ) if cj == ci && mj == mi => Some((*wj, *wi)),
            _ => None,
        }
    }

    /// G_j B_i(alpha | Z).
    pub fn gb(&self, j: usize, i: usize, a: f64) -> f64 {
        if i == j {
            return a;
        }
        match self.same_base(j, i) {
            Some((wj, wi)) => wj.q(wi.inv(a)),
            None => self.level(j, self.bid(i, a)),
        }
    }

    /// d G_j B_i / d alpha.
    pub fn gb_deriv(&self, j: usize, i: usize, a: f64) -> f64 {
        if i == j {
            return 1.0;
        }
        match self.same_base(j, i) {
            Some((wj, wi)) => {
                let b = wi.inv(a);
                wj.dq(b) / wi.dq(b)
            }
            None => self.bid_deriv(i, a) / self.bid_deriv(j, self.gb(j, i, a)),
        }
    }
}

#[derive(Debug, Clone)]
pub enum ProfileKind {
    Synthetic {
        base: BaseSpec,
        warps: Vec<Warp>,
        /// Per-bidder (shift, stretch) applied after the base; (0, 1) for common endpoints.
        affine: Vec<(f64, f64)>,
    },
    /// Tabulated strategies at a finite set of covariate points.
    Tables {
        points: Vec<(Covariates, Vec<CubicHermite>)>,
    },
}

#[derive(Debug, Clone)]
pub struct StrategyProfile {
    n: usize,
    kind: ProfileKind,
}

impl StrategyProfile {
    /// Synthetic profile with common endpoints; `warps[0]` must be the identity.
    pub fn synthetic(base: BaseSpec, warps: Vec<Warp>, dim: usize) -> Result<Self> {
        let n = warps.len();
        Self::synthetic_affine(base, warps, vec![(0.0, 1.0); n], dim)
    }

    pub fn synthetic_affine(
        base: BaseSpec,
        warps: Vec<Warp>,
        affine: Vec<(f64, f64)>,
        dim: usize,
    ) -> Result<Self> {
        let n = warps.len();
        if n < 2 || affine.len() != n {
            return Err(Error::invalid(
                "profile needs n >= 2 warps and n affine maps",
            ));
        }
        if warps[0] != Warp::Identity {
            return Err(Error::invalid("bidder 1 warp must be the identity"));
        }
        for w in &warps {
            w.validate(n * dim)?;
        }
        if affine.iter().any(|(_, m)| !(*m > 0.0)) {
            return Err(Error::invalid("affine stretch must be positive"));
        }
        if let BaseSpec::Linear { lo, hi } = base {
            if !(hi > lo) {
                return Err(Error::invalid("linear base must be strictly increasing"));
            }
        }
        Ok(Self {
            n,
            kind: ProfileKind::Synthetic {
                base,
                warps,
                affine,
            },
        })
    }

    /// Symmetric profile with a linear base: every bidder bids lo + (hi - lo) alpha.
    pub fn symmetric_linear(n: usize, lo: f64, hi: f64, dim: usize) -> Result<Self> {
        Self::synthetic(BaseSpec::Linear { lo, hi }, vec![Warp::Identity; n], dim)
    }

    /// Canonical asymmetric fixture: q_k = alpha + delta_k(Z) alpha(1-alpha), delta_k = tanh(Z_k - Z_1)/2.
    pub fn canonical(n: usize, base: BaseSpec) -> Result<Self> {
        let mut warps = vec![Warp::Identity];
        for k in 1..n {
            warps.push(Warp::Quadratic {
                delta: DeltaFn::canonical(n, k),
            });
        }
        Self::synthetic(base, warps, 1)
    }

    pub fn tables(points: Vec<(Covariates, Vec<CubicHermite>)>) -> Result<Self> {
        let n = points.first().map(|p| p.1.len()).ok_or_else(|| {
            Error::invalid("tabulated profile needs at least one covariate point")
        })?;
        if points.iter().any(|p| p.1.len() != n || p.0.n() != n) {
            return Err(Error::invalid("every covariate point needs n bid tables"));
        }
        Ok(Self {
            n,
            kind: ProfileKind::Tables { points },
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &ProfileKind {
        &self.kind
    }

    /// True when slices need the model (best-response base).
    pub fn needs_model(&self) -> bool {
        matches!(
            &self.kind,
            ProfileKind::Synthetic {
                base: BaseSpec::BestResponse,
                ..
            }
        )
    }

    /// Covariate points of a tabulated profile.
    pub fn support(&self) -> Option<Vec<Covariates>> {
        match &self.kind {
            ProfileKind::Tables { points } => Some(points.iter().map(|p| p.0.clone()).collect()),
            _ => None,
        }
    }

    /// Strategies at one covariate point. `best_response` supplies the base table when
    /// the profile uses a best-response base.
    pub fn slice_with<F>(&self, z: &Covariates, best_response: F) -> Result<ProfileSlice>
    where
        F: FnOnce(&[WarpAt]) -> Result<CubicHermite>,
    {
        match &self.kind {
            ProfileKind::Synthetic {
                base,
                warps,
                affine,
            } => {
                let at: Vec<WarpAt> = warps.iter().map(|w| w.at(z)).collect();
                let base = match base {
                    BaseSpec::Linear { lo, hi } => BaseCurve::Linear { lo: *lo, hi: *hi },
                    BaseSpec::BestResponse => BaseCurve::Table(best_response(&at)?),
                };
                let curves = at
                    .iter()
                    .zip(affine)
                    .map(|(w, (c, m))| BidCurve::Composed {
                        base: base.clone(),
                        warp: *w,
                        shift: *c,
                        stretch: *m,
                    })
                    .collect();
                Ok(ProfileSlice {
                    z: z.clone(),
                    curves,
                })
            }
            ProfileKind::Tables { points } => {
                let hit = points.iter().find(|(p, _)| {
                    p.values().len() == z.values().len()
                        && p.values()
                            .iter()
                            .zip(z.values())
                            .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0))
                });
                match hit {
                    Some((_, tables)) => Ok(ProfileSlice {
                        z: z.clone(),
                        curves: tables.iter().cloned().map(BidCurve::Table).collect(),
                    }),
                    None => Err(Error::invalid(format!(
                        "covariate point {:?} is not in the tabulated profile's support",
                        z.values()
                    ))),
                }
            }
        }
    }

    /// Slice for profiles that do not need a best-response solve.
    pub fn slice(&self, z: &Covariates) -> Result<ProfileSlice> {
        self.slice_with(z, |_| {
            Err(Error::invalid(
                "profile has a best-response base; use the model-aware slice",
            ))
        })
    }

    /// Analytic d G_j B_i(alpha | Z) / d vec(Z) when available (synthetic warps).
    pub fn gb_zgrad(&self, j: usize, i: usize, a: f64, z: &Covariates) -> Option<Vec<f64>> {
        match &self.kind {
            ProfileKind::Synthetic { warps, affine, .. } => {
                if i == j {
                    return Some(vec![0.0; z.values().len()]);
                }
                if affine[i] != affine[j] {
                    return None;
                }
                let (wi, wj) = (warps[i].at(z), warps[j].at(z));
                let beta = wi.inv(a);
                let dqj = warps[j].zgrad(beta, z);
                let dqi = warps[i].zgrad(beta, z);
                let dinv = wi.dq(beta);
                let slope = wj.dq(beta);
                Some(
                    dqj.iter()
                        .zip(&dqi)
                        .map(|(gj, gi)| gj - slope * gi / dinv)
                        .collect(),
                )
            }
            ProfileKind::Tables { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z(v: &[f64]) -> Covariates {
        Covariates::scalar(v).unwrap()
    }

    #[test]
    fn symmetric_profile_has_identity_gb() {
        let p = StrategyProfile::symmetric_linear(3, 0.1, 0.9, 1).unwrap();
        let s = p.slice(&z(&[1.0, 2.0, 3.0])).unwrap();
        for &a in &[0.0, 0.3, 1.0] {
            assert_eq!(s.gb(1, 0, a), a);
            assert!((s.gb(2, 1, a) - a).abs() < 1e-15);
        }
    }

    #[test]
    fn canonical_family_value() {
        let p = StrategyProfile::canonical(2, BaseSpec::Linear { lo: 0.0, hi: 1.0 }).unwrap();
        let zz = z(&[1.0, 1.7]);
        let s = p.slice(&zz).unwrap();
        let d = 0.5 * (0.7f64).tanh();
        assert!((s.gb(1, 0, 0.5) - (0.5 + d / 4.0)).abs() < 1e-15);
        assert_eq!(s.gb(1, 0, 0.0), 0.0);
        assert!((s.gb(1, 0, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn composition_gives_square_root() {
        // s_2(beta) = s_1(beta^2): the warp of bidder 2 is the square root.
        let p = StrategyProfile::synthetic(
            BaseSpec::Linear { lo: 0.0, hi: 1.0 },
            vec![Warp::Identity, Warp::Power { exponent: 0.5 }],
            1,
        )
        .unwrap();
        let s = p.slice(&z(&[1.0, 1.0])).unwrap();
        for &b in &[0.1, 0.5, 0.8] {
            assert!((s.bid(1, b) - s.bid(0, b * b)).abs() < 1e-15);
        }
        assert!((s.gb(1, 0, 0.49) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn rejects_large_delta() {
        let w = Warp::Quadratic {
            delta: DeltaFn {
                scale: 1.0,
                weights: vec![0.0, 1.0],
                offset: 0.0,
            },
        };
        assert!(StrategyProfile::synthetic(
            BaseSpec::Linear { lo: 0.0, hi: 1.0 },
            vec![Warp::Identity, w],
            1
        )
        .is_err());
    }

    #[test]
    fn gb_gradient_matches_family() {
        let p = StrategyProfile::canonical(2, BaseSpec::Linear { lo: 0.0, hi: 1.0 }).unwrap();
        let zz = z(&[1.2, 0.9]);
        let a = 0.35;
        let g = p.gb_zgrad(1, 0, a, &zz).unwrap();
        let sech2 = 1.0 - (-0.3f64).tanh().powi(2);
        assert!((g[1] - a * (1.0 - a) * 0.5 * sech2).abs() < 1e-15);
        assert!((g[0] + a * (1.0 - a) * 0.5 * sech2).abs() < 1e-15);
        // Reverse direction through finite differences.
        let h = 1e-5;
        let f = |v: f64| p.slice(&zz.with(1, 0, v)).unwrap().gb(0, 1, a);
        let fd = (f(0.9 + h) - f(0.9 - h)) / (2.0 * h);
        let an = p.gb_zgrad(0, 1, a, &zz).unwrap()[1];
        assert!((fd - an).abs() < 1e-8, "{fd} {an}");
    }
}
