//! Winning probabilities, expected payoffs and values along the winning frontier.
//!
//! Every quantity conditions on A_i = alpha. Because copula marginals are uniform,
//! the conditional density of the other signals given A_i = alpha is the joint
//! copula density itself.

use crate::error::{Error, Result};
use crate::model::{CopulaKind, Covariates, MixedSignalModel, Valuation};
use crate::numerics::quadrature::{gauss_legendre, Rule};
use crate::numerics::special::{norm_cdf, norm_pdf, norm_quantile};

use super::profile::ProfileSlice;

/// Lower end of the normal-score range; F(-8.5) is about 1e-17.
const SCORE_FLOOR: f64 = -8.5;

/// Quadrature over [0, u] against the signal measure, in normal scores for
/// Gaussian copulas (their density has power-type behaviour at the edges).
#[derive(Debug, Clone)]
pub struct SignalQuadrature {
    rule: Rule,
    panels: usize,
}

impl Default for SignalQuadrature {
    fn default() -> Self {
        Self {
            rule: gauss_legendre(20),
            panels: 6,
        }
    }
}

impl SignalQuadrature {
    pub fn new(nodes: usize, panels: usize) -> Self {
        Self {
            rule: gauss_legendre(nodes),
            panels: panels.max(1),
        }
    }

    /// Integral of f(t) dt over [0, u].
    pub fn upto<F: FnMut(f64) -> f64>(&self, independent: bool, u: f64, mut f: F) -> f64 {
        let u = u.clamp(0.0, 1.0);
        if u <= 0.0 {
            return 0.0;
        }
        if independent {
            return self.rule.integrate_composite(0.0, u, self.panels, f);
        }
        let hi = if u >= 1.0 {
            -SCORE_FLOOR
        } else {
            norm_quantile(u).min(-SCORE_FLOOR)
        };
        if hi <= SCORE_FLOOR {
            return 0.0;
        }
        self.rule
            .integrate_composite(SCORE_FLOOR, hi, self.panels, |x| {
                f(norm_cdf(x)) * norm_pdf(x)
            })
    }
}

fn is_independent(model: &MixedSignalModel) -> bool {
    matches!(model.copula().kind(), CopulaKind::Independence)
}

fn others(n: usize, i: usize) -> Vec<usize> {
    (0..n).filter(|j| *j != i).collect()
}

/// True when bidder i's value depends on her own signal only.
pub fn is_private_value(model: &MixedSignalModel, i: usize) -> bool {
    model.combiner(i).active_set() == vec![i]
}

fn value_at(model: &MixedSignalModel, i: usize, a: &[f64], z: &Covariates) -> f64 {
    let a: Vec<f64> = a.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    model.combiner(i).eval(&model.mixed_signals(i, &a, z))
}

/// omega_i(a | alpha, Z): probability that bidder i's level-a bid beats all opponents.
pub fn winning_probability(
    model: &MixedSignalModel,
    slice: &ProfileSlice,
    i: usize,
    a: f64,
    alpha: f64,
) -> f64 {
    let upper: Vec<f64> = others(slice.n(), i)
        .iter()
        .map(|&j| slice.gb(j, i, a))
        .collect();
    model.copula().cond_prob(&[alpha], &upper, &slice.z)
}

/// Probability that a bid beats all opponents given A_i = alpha.
pub fn winning_probability_at_bid(
    model: &MixedSignalModel,
    slice: &ProfileSlice,
    i: usize,
    bid: f64,
    alpha: f64,
) -> f64 {
    let upper: Vec<f64> = others(slice.n(), i)
        .iter()
        .map(|&j| slice.level(j, bid))
        .collect();
    model.copula().cond_prob(&[alpha], &upper, &slice.z)
}

/// d omega_i(a | alpha, Z) / da at a = alpha.
pub fn winning_probability_slope(
    model: &MixedSignalModel,
    slice: &ProfileSlice,
    i: usize,
    alpha: f64,
) -> f64 {
    let z = &slice.z;
    let opp = others(slice.n(), i);
    let u: Vec<f64> = opp.iter().map(|&j| slice.gb(j, i, alpha)).collect();
    let c = model.copula();
    let mut total = 0.0;
    for (k, &j) in opp.iter().enumerate() {
        let g = slice.gb_deriv(j, i, alpha);
        let dens = c.marginal_density(&[alpha, u[k]], z);
        let rest: Vec<f64> = u
            .iter()
            .enumerate()
            .filter(|(m, _)| *m != k)
            .map(|(_, v)| *v)
            .collect();
        total += g * dens * c.cond_prob(&[alpha, u[k]], &rest, z);
    }
    total
}

/// Omega_i(alpha | Z) = omega_i(alpha | alpha, Z) / d_a omega_i(a | alpha, Z)|_{a = alpha}.
pub fn omega_ratio(
    model: &MixedSignalModel,
    slice: &ProfileSlice,
    i: usize,
    alpha: f64,
) -> Result<f64> {
    let num = winning_probability(model, slice, i, alpha, alpha);
    let den = winning_probability_slope(model, slice, i, alpha);
    if !(den > 0.0) || !den.is_finite() {
        return Err(Error::numerical(
            format!(
                "winning-probability slope vanishes at alpha = {alpha}, Z = {:?}",
                slice.z.values()
            ),
            Some(den),
        ));
    }
    Ok(num / den)
}

/// W(alpha | Z) = d/da E[V_i 1{bidder i wins with level a} | A_i = alpha] at a = alpha.
pub fn frontier_value_density(
    model: &MixedSignalModel,
    slice: &ProfileSlice,
    i: usize,
    alpha: f64,
    quad: &SignalQuadrature,
) -> Result<f64> {
    let n = slice.n();
    let z = &slice.z;
    if is_private_value(model, i) {
        let mut a = vec![0.0; n];
        a[i] = alpha;
        return Ok(value_at(model, i, &a, z) * winning_probability_slope(model, slice, i, alpha));
    }
    let opp = others(n, i);
    let u: Vec<f64> = opp.iter().map(|&j| slice.gb(j, i, alpha)).collect();
    let c = model.copula();
    let indep = is_independent(model);
    let mut total = 0.0;
    for (k, &j) in opp.iter().enumerate() {
        let g = slice.gb_deriv(j, i, alpha);
        let mut pt = vec![0.0; n];
        pt[i] = alpha;
        pt[j] = u[k];
        let inner = match n {
            2 => value_at(model, i, &pt, z) * c.density(&pt, z),
            3 => {
                let (m, um) = if k == 0 {
                    (opp[1], u[1])
                } else {
                    (opp[0], u[0])
                };
                quad.upto(indep, um, |t| {
                    let mut p = pt.clone();
                    p[m] = t;
                    value_at(model, i, &p, z) * c.density(&p, z)
                })
            }
            _ => {
                return Err(Error::Unsupported(format!(
                    "frontier integrals for n = {n} with interdependent values"
                )))
            }
        };
        total += g * inner;
    }
    Ok(total)
}

/// U_i(alpha | Z) = E[V_i | A_i = alpha, bidder i ties the highest opponent bid].
pub fn frontier_value(
    model: &MixedSignalModel,
    slice: &ProfileSlice,
    i: usize,
    alpha: f64,
    quad: &SignalQuadrature,
) -> Result<f64> {
    let n = slice.n();
    if n == 2 || is_private_value(model, i) {
        let mut a = vec![0.0; n];
        a[i] = alpha;
        if n == 2 {
            a[1 - i] = slice.gb(1 - i, i, alpha);
        }
        return Ok(value_at(model, i, &a, &slice.z));
    }
    let w = frontier_value_density(model, slice, i, alpha, quad)?;
    let d = winning_probability_slope(model, slice, i, alpha);
    if !(d > 0.0) {
        return Err(Error::numerical(
            format!("winning-probability slope vanishes at alpha = {alpha}"),
            Some(d),
        ));
    }
    Ok(w / d)
}

/// Two-bidder frontier value for any valuation: V_i(alpha, G_j B_i(alpha)).
pub fn frontier_value_pair<V: Valuation + ?Sized>(
    valuation: &V,
    slice: &ProfileSlice,
    i: usize,
    alpha: f64,
) -> Result<f64> {
    if valuation.n() != 2 || slice.n() != 2 {
        return Err(Error::invalid("pair frontier value needs two bidders"));
    }
    let mut a = [0.0; 2];
    a[i] = alpha;
    a[1 - i] = slice.gb(1 - i, i, alpha);
    valuation.value(i, &a, &slice.z)
}

/// E[V_i 1{A_j <= u_j for all j != i} | A_i = alpha].
pub fn truncated_value(
    model: &MixedSignalModel,
    i: usize,
    alpha: f64,
    upper: &[f64],
    z: &Covariates,
    quad: &SignalQuadrature,
) -> Result<f64> {
    let n = model.n();
    let opp = others(n, i);
    let c = model.copula();
    if is_private_value(model, i) {
        let mut a = vec![0.0; n];
        a[i] = alpha;
        return Ok(value_at(model, i, &a, z) * c.cond_prob(&[alpha], upper, z));
    }
    let indep = is_independent(model);
    let mut pt = vec![0.0; n];
    pt[i] = alpha;
    match n {
        2 => Ok(quad.upto(indep, upper[0], |t| {
            let mut p = pt.clone();
            p[opp[0]] = t;
            value_at(model, i, &p, z) * c.density(&p, z)
        })),
        3 => Ok(quad.upto(indep, upper[0], |t| {
            let mut p = pt.clone();
            p[opp[0]] = t;
            quad.upto(indep, upper[1], |s| {
                let mut q = p.clone();
                q[opp[1]] = s;
                value_at(model, i, &q, z) * c.density(&q, z)
            })
        })),
        _ => Err(Error::Unsupported(format!(
            "expected values for n = {n} with interdependent values"
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Payoff {
    pub value: f64,
    pub win_probability: f64,
    /// The bid was outside bidder i's own support and was clamped for the level lookup.
    pub clamped: bool,
}

/// Expected payoff of bidding `bid` with own signal alpha.
pub fn expected_payoff(
    model: &MixedSignalModel,
    slice: &ProfileSlice,
    i: usize,
    bid: f64,
    alpha: f64,
    quad: &SignalQuadrature,
) -> Result<Payoff> {
    if !(bid >= 0.0) {
        return Err(Error::invalid(format!(
            "bid must be non-negative, got {bid}"
        )));
    }
    let lo = slice.bid(i, 0.0);
    let hi = slice.bid(i, 1.0);
    let upper: Vec<f64> = others(slice.n(), i)
        .iter()
        .map(|&j| slice.level(j, bid))
        .collect();
    let p = model.copula().cond_prob(&[alpha], &upper, &slice.z);
    let vbar = if p <= 0.0 {
        0.0
    } else {
        truncated_value(model, i, alpha, &upper, &slice.z, quad)?
    };
    Ok(Payoff {
        value: vbar - bid * p,
        win_probability: p,
        clamped: bid < lo || bid > hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{examples, SignalCopula, SlopeFunction};
    use crate::strategy::profile::StrategyProfile;
    use rand::SeedableRng;

    fn z2() -> Covariates {
        Covariates::scalar(&[1.0, 1.0]).unwrap()
    }

    #[test]
    fn independent_symmetric_probabilities() {
        for n in 2..5 {
            let m = examples::uniform_ipv(n);
            let p = StrategyProfile::symmetric_linear(n, 0.1, 0.9, 1).unwrap();
            let s = p
                .slice(&Covariates::scalar(&vec![1.0; n]).unwrap())
                .unwrap();
            for &a in &[0.2, 0.7] {
                let w = winning_probability(&m, &s, 0, a, 0.4);
                assert!((w - a.powi(n as i32 - 1)).abs() < 1e-14);
                let om = omega_ratio(&m, &s, 0, a).unwrap();
                assert!((om - a / (n - 1) as f64).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn gaussian_winning_probability_matches_monte_carlo() {
        let m = examples::uniform_ipv(2)
            .with_copula(SignalCopula::gaussian(2, 0.5).unwrap())
            .unwrap();
        let p = StrategyProfile::symmetric_linear(2, 0.1, 0.9, 1).unwrap();
        let s = p.slice(&z2()).unwrap();
        let w = winning_probability(&m, &s, 0, 0.5, 0.5);
        // Monte Carlo over A_2 | A_1 = 0.5: the normal score of A_2 is N(0, 1 - rho^2).
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let draws = 200_000;
        let sd = (1.0f64 - 0.25).sqrt();
        let hits = (0..draws)
            .filter(|_| {
                let e: f64 = rand::Rng::sample(&mut rng, rand_distr::StandardNormal);
                norm_cdf(sd * e) <= 0.5
            })
            .count() as f64;
        let ph = hits / draws as f64;
        let se = (ph * (1.0 - ph) / draws as f64).sqrt();
        assert!((w - ph).abs() < 3.0 * se, "{w} {ph}");
    }

    #[test]
    fn omega_denominator_matches_finite_difference() {
        let m = examples::uniform_ipv(2)
            .with_copula(SignalCopula::gaussian(2, 0.4).unwrap())
            .unwrap();
        let p =
            StrategyProfile::canonical(2, crate::strategy::BaseSpec::Linear { lo: 0.1, hi: 0.9 })
                .unwrap();
        let s = p.slice(&Covariates::scalar(&[1.0, 1.5]).unwrap()).unwrap();
        let alpha = 0.5;
        let an = winning_probability_slope(&m, &s, 0, alpha);
        let fd = crate::numerics::diff::central5(
            |a| winning_probability(&m, &s, 0, a, alpha),
            alpha,
            1e-3,
        );
        assert!((an - fd).abs() < 1e-4 * an.abs().max(1.0), "{an} {fd}");
    }

    #[test]
    fn uniform_ipv_payoff() {
        let m = examples::uniform_ipv(2);
        let p = StrategyProfile::symmetric_linear(2, 1e-9, 0.5, 1).unwrap();
        let s = p.slice(&z2()).unwrap();
        let q = SignalQuadrature::default();
        let alpha = 0.6;
        // Bidding alpha/2 wins with probability alpha and earns alpha - alpha/2.
        let pay = expected_payoff(&m, &s, 0, 0.3, alpha, &q).unwrap();
        assert!((pay.value - alpha * alpha / 2.0).abs() < 1e-8);
        let top = expected_payoff(&m, &s, 0, 0.6, alpha, &q).unwrap();
        assert!((top.value - (alpha - 0.6)).abs() < 1e-12 && top.clamped);
        let low = expected_payoff(&m, &s, 0, 1e-12, alpha, &q).unwrap();
        assert_eq!(low.value, 0.0);
    }

    #[test]
    fn three_bidder_frontier_against_brute_force() {
        let m = examples::additive_symmetric(
            3,
            SlopeFunction::linear(0.2, 1.0),
            SlopeFunction::linear(0.1, 0.6),
            SignalCopula::gaussian(3, 0.3).unwrap(),
        );
        let p =
            StrategyProfile::canonical(3, crate::strategy::BaseSpec::Linear { lo: 0.1, hi: 0.9 })
                .unwrap();
        let z = Covariates::scalar(&[1.0, 1.4, 0.8]).unwrap();
        let s = p.slice(&z).unwrap();
        let q = SignalQuadrature::default();
        let alpha = 0.45;
        let u = frontier_value(&m, &s, 0, alpha, &q).unwrap();
        // Brute force: finite-difference the truncated expected value in the bid level.
        let f = |a: f64| {
            let upper = [s.gb(1, 0, a), s.gb(2, 0, a)];
            truncated_value(&m, 0, alpha, &upper, &z, &q).unwrap()
        };
        let w = crate::numerics::diff::central5(f, alpha, 1e-3);
        let d = winning_probability_slope(&m, &s, 0, alpha);
        assert!((u - w / d).abs() < 1e-7, "{u} {}", w / d);
    }
}
