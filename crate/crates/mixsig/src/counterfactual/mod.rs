//! Pseudo private values and expected seller revenue under first- and second-price rules.
//!
//! With exchangeable bidders the second-price equilibrium bid is the pseudo private value
//! V(alpha) = E[V_i | A_i = alpha, max_{j != i} A_j = alpha], and the first-price bid solves
//! s' = (V - s) / Omega. Revenues are Monte Carlo means over copula draws.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::identify::{IdentifiedPrimitives, PhiFn};
use crate::model::{examples, Covariates, MixedSignalModel, SignalCopula};
use crate::numerics::interp::CubicHermite;
use crate::numerics::linspace;
use crate::strategy::equilibrium::{slice_for, solve_markdown_ode, symmetric_slice, SolveOptions};
use crate::strategy::payoff::{frontier_value, omega_ratio};
use crate::strategy::StrategyProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuctionFormat {
    FirstPrice,
    SecondPrice,
}

impl AuctionFormat {
    pub fn tag(self) -> &'static str {
        match self {
            AuctionFormat::FirstPrice => "first_price",
            AuctionFormat::SecondPrice => "second_price",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RevenueReport {
    pub format: AuctionFormat,
    pub n: usize,
    pub revenue: f64,
    pub std_error: f64,
    pub draws: usize,
    pub seed: u64,
    pub z: Vec<f64>,
}

/// Number of independent random streams the draws are split over.
const STREAMS: u64 = 64;

/// Mean and standard error of f(A) over copula draws; stream k uses ChaCha stream k, so
/// results do not depend on the thread count.
pub fn monte_carlo<F>(
    copula: &SignalCopula,
    z: &Covariates,
    draws: usize,
    seed: u64,
    f: F,
) -> Result<(f64, f64)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    if draws < 2 {
        return Err(Error::invalid("Monte Carlo needs at least 2 draws"));
    }
    let per = draws as u64 / STREAMS;
    let extra = draws as u64 % STREAMS;
    // Per-stream (count, mean, M2), merged in stream order so the result does not depend on
    // the thread count.
    let parts: Vec<(f64, f64, f64)> = (0..STREAMS)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(k);
            let count = per + u64::from(k < extra);
            let (mut mean, mut m2) = (0.0, 0.0);
            for i in 0..count {
                let v = f(&copula.sample(z, &mut rng));
                let d = v - mean;
                mean += d / (i + 1) as f64;
                m2 += d * (v - mean);
            }
            (count as f64, mean, m2)
        })
        .collect();
    let (count, mean, m2) = parts.into_iter().fold((0.0, 0.0, 0.0), |a, b| {
        let c = a.0 + b.0;
        if c == 0.0 {
            return a;
        }
        let d = b.1 - a.1;
        (c, a.1 + d * b.0 / c, a.2 + b.2 + d * d * a.0 * b.0 / c)
    });
    let m = count;
    let var = (m2 / (m - 1.0)).max(0.0);
    if !mean.is_finite() {
        return Err(Error::numerical("Monte Carlo revenue is not finite", None));
    }
    Ok((mean, (var / m).sqrt()))
}

fn check_symmetric(model: &MixedSignalModel, z: &Covariates) -> Result<()> {
    if !model.is_symmetric() {
        return Err(Error::invalid(
            "pseudo private values and format comparisons are defined for exchangeable bidders only",
        ));
    }
    if z.n() != model.n() || z.dim() != model.dim() {
        return Err(Error::invalid("covariate shape does not match the model"));
    }
    if (1..z.n()).any(|j| z.bidder(j) != z.bidder(0)) {
        return Err(Error::invalid(
            "format comparisons need identical covariates across bidders",
        ));
    }
    Ok(())
}

/// V(alpha) on `alphas` for bidder 1 of an exchangeable model.
pub fn pseudo_private_values(
    model: &MixedSignalModel,
    alphas: &[f64],
    z: &Covariates,
) -> Result<Vec<f64>> {
    check_symmetric(model, z)?;
    let slice = symmetric_slice(model.n(), z);
    let q = SolveOptions::default().quadrature;
    alphas
        .iter()
        .map(|&a| frontier_value(model, &slice, 0, a, &q))
        .collect()
}

fn pseudo_value_curve(alphas: Vec<f64>, values: Vec<f64>) -> Result<CubicHermite> {
    CubicHermite::monotone(alphas, values)
}

fn second_highest(a: &[f64]) -> f64 {
    let mut top = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for &v in a {
        if v > top {
            second = top;
            top = v;
        } else if v > second {
            second = v;
        }
    }
    second
}

/// Mean winning bid when every bidder follows `profile` (solved or synthetic).
pub fn expected_revenue_first_price(
    model: &MixedSignalModel,
    profile: &StrategyProfile,
    z: &Covariates,
    draws: usize,
    seed: u64,
    opts: &SolveOptions,
) -> Result<RevenueReport> {
    let slice = slice_for(profile, model, z, opts)?;
    let n = model.n();
    let (revenue, std_error) = monte_carlo(model.copula(), z, draws, seed, |a| {
        (0..n)
            .map(|j| slice.bid(j, a[j]))
            .fold(f64::NEG_INFINITY, f64::max)
    })?;
    Ok(RevenueReport {
        format: AuctionFormat::FirstPrice,
        n,
        revenue,
        std_error,
        draws,
        seed,
        z: z.values().to_vec(),
    })
}

/// Mean of V(A_(2)), the pseudo private value at the second-highest signal.
pub fn expected_revenue_second_price(
    model: &MixedSignalModel,
    z: &Covariates,
    draws: usize,
    seed: u64,
    grid_points: usize,
) -> Result<RevenueReport> {
    let grid = linspace(0.0, 1.0, grid_points.max(3));
    let curve = pseudo_value_curve(grid.clone(), pseudo_private_values(model, &grid, z)?)?;
    let (revenue, std_error) = monte_carlo(model.copula(), z, draws, seed, |a| {
        curve.eval(second_highest(a))
    })?;
    Ok(RevenueReport {
        format: AuctionFormat::SecondPrice,
        n: model.n(),
        revenue,
        std_error,
        draws,
        seed,
        z: z.values().to_vec(),
    })
}

/// Both formats for an exchangeable model, the first-price one at the solved equilibrium.
pub fn compare_formats(
    model: &MixedSignalModel,
    z: &Covariates,
    draws: usize,
    seed: u64,
    opts: &SolveOptions,
) -> Result<(RevenueReport, RevenueReport)> {
    check_symmetric(model, z)?;
    let (profile, _) = crate::strategy::solve_symmetric_fpa(model, z, opts)?;
    let fpa = expected_revenue_first_price(model, &profile, z, draws, seed, opts)?;
    let spa = expected_revenue_second_price(model, z, draws, seed, 1025)?;
    Ok((fpa, spa))
}

/// Pseudo private values implied by recovered two-bidder primitives at a symmetric Z:
/// V(alpha) = Phi-hat(Z_1' gamma-hat_1(alpha), Z_2' gamma-hat_2(alpha)).
pub fn pseudo_values_from_primitives(
    prims: &IdentifiedPrimitives,
    z: &Covariates,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = prims.phi.n;
    if n != 2 {
        return Err(Error::Unsupported(
            "revenue from recovered primitives is implemented for two bidders".into(),
        ));
    }
    if z.n() != 2 || z.bidder(0) != z.bidder(1) {
        return Err(Error::invalid(
            "format comparisons need identical covariates across bidders",
        ));
    }
    let mut values = Vec::with_capacity(prims.alpha.len());
    for &a in &prims.alpha {
        let mut x = vec![0.0; n];
        for j in 0..n {
            if let Some(g) = prims.slope_at(j, a) {
                x[j] = z.dot(j, &g);
            } else if prims.active.contains(&j) {
                return Err(Error::invalid(format!(
                    "slope of active bidder {} was not recovered",
                    j + 1
                )));
            }
        }
        values.push(prims.phi.eval(&x)?);
    }
    Ok((prims.alpha.clone(), values))
}

/// Revenue under both formats computed from recovered primitives rather than the generator.
pub fn revenue_from_primitives(
    prims: &IdentifiedPrimitives,
    copula: &SignalCopula,
    z: &Covariates,
    draws: usize,
    seed: u64,
    opts: &SolveOptions,
) -> Result<(RevenueReport, RevenueReport)> {
    if copula.n() != 2 {
        return Err(Error::invalid("copula must cover two bidders"));
    }
    let (alphas, values) = pseudo_values_from_primitives(prims, z)?;
    let curve = pseudo_value_curve(alphas, values)?;
    // Omega depends on the copula alone under symmetric strategies.
    let carrier = examples::uniform_ipv(2).with_copula(copula.clone())?;
    let slice = symmetric_slice(2, z);
    let (bid, _) = solve_markdown_ode(
        |a| Ok(curve.eval(a)),
        |a| omega_ratio(&carrier, &slice, 0, a),
        curve.eval(0.0),
        opts,
    )?;
    let zv = z.values().to_vec();
    let (r1, se1) = monte_carlo(copula, z, draws, seed, |a| bid.eval(a[0].max(a[1])))?;
    let (r2, se2) = monte_carlo(copula, z, draws, seed, |a| curve.eval(second_highest(a)))?;
    Ok((
        RevenueReport {
            format: AuctionFormat::FirstPrice,
            n: 2,
            revenue: r1,
            std_error: se1,
            draws,
            seed,
            z: zv.clone(),
        },
        RevenueReport {
            format: AuctionFormat::SecondPrice,
            n: 2,
            revenue: r2,
            std_error: se2,
            draws,
            seed,
            z: zv,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Combiner, SlopeFunction};

    #[test]
    fn uniform_ipv_formats_are_equivalent() {
        let m = examples::uniform_ipv(2);
        let z = Covariates::scalar(&[1.0, 1.0]).unwrap();
        let (f, s) = compare_formats(&m, &z, 200_000, 7, &SolveOptions::default()).unwrap();
        assert!((f.revenue - 1.0 / 3.0).abs() < 3.0 * f.std_error, "{f:?}");
        assert!((s.revenue - 1.0 / 3.0).abs() < 3.0 * s.std_error, "{s:?}");
    }

    #[test]
    fn three_bidder_first_price_revenue() {
        let m = examples::uniform_ipv(3);
        let z = Covariates::scalar(&[1.0, 1.0, 1.0]).unwrap();
        let (p, _) =
            crate::strategy::solve_symmetric_fpa(&m, &z, &SolveOptions::default()).unwrap();
        let r =
            expected_revenue_first_price(&m, &p, &z, 200_000, 3, &SolveOptions::default()).unwrap();
        assert!((r.revenue - 0.5).abs() < 3.0 * r.std_error, "{r:?}");
    }

    #[test]
    fn seeds_reproduce_exactly() {
        let m = examples::uniform_ipv(2);
        let z = Covariates::scalar(&[1.0, 1.0]).unwrap();
        let a = expected_revenue_second_price(&m, &z, 10_000, 11, 257).unwrap();
        let b = expected_revenue_second_price(&m, &z, 10_000, 11, 257).unwrap();
        assert_eq!(a.revenue.to_bits(), b.revenue.to_bits());
    }

    #[test]
    fn three_bidder_pseudo_values_match_closed_form() {
        // Phi = x1 + x2 + x3, gamma = 0.5 + 0.5 t for all, independent signals:
        // V(alpha) = 2 gamma(alpha) + E[gamma(A) | A <= alpha] = 2 gamma(alpha) + 0.5 + 0.25 alpha.
        let m = examples::from_first_bidder(
            Combiner::additive(vec![1.0; 3]),
            vec![SlopeFunction::linear(0.5, 1.0); 3],
            SignalCopula::independence(3),
        )
        .unwrap();
        let z = Covariates::scalar(&[1.0, 1.0, 1.0]).unwrap();
        let alphas = [0.1, 0.4, 0.8];
        let v = pseudo_private_values(&m, &alphas, &z).unwrap();
        for (a, got) in alphas.iter().zip(&v) {
            let want = 2.0 * (0.5 + 0.5 * a) + 0.5 + 0.25 * a;
            assert!((got - want).abs() < 1e-8, "{a}: {got} vs {want}");
        }
    }

    #[test]
    fn asymmetric_models_are_rejected() {
        let m = examples::uniform_ipv(2);
        let z = Covariates::scalar(&[1.0, 2.0]).unwrap();
        assert!(pseudo_private_values(&m, &[0.5], &z).is_err());
    }

    #[test]
    fn recovered_primitives_reproduce_generator_revenue() {
        let phi = Combiner::bilinear_interaction();
        let slopes = vec![
            SlopeFunction::linear(0.5, 1.0),
            SlopeFunction::linear(0.4, 1.0),
        ];
        let m = examples::from_first_bidder(phi, slopes, SignalCopula::independence(2)).unwrap();
        let p =
            StrategyProfile::canonical(2, crate::strategy::BaseSpec::Linear { lo: 0.1, hi: 0.9 })
                .unwrap();
        let f = crate::field::OracleField::from_model(m.clone(), p, 0).unwrap();
        let opts = crate::identify::IdentifyOptions {
            overid_points: Some(vec![]),
            ..Default::default()
        };
        let prims = crate::identify::identify(&f, &opts).unwrap();
        let z = Covariates::scalar(&[1.5, 1.5]).unwrap();
        let so = SolveOptions::default();
        let (f1, s1) = revenue_from_primitives(&prims, m.copula(), &z, 50_000, 5, &so).unwrap();
        let (f0, s0) = compare_formats(&m, &z, 50_000, 5, &so).unwrap();
        assert!((f1.revenue - f0.revenue).abs() < 1e-4, "{f1:?} {f0:?}");
        assert!((s1.revenue - s0.revenue).abs() < 1e-4, "{s1:?} {s0:?}");
    }

    #[test]
    fn affiliated_signals_favour_second_price() {
        let m = examples::from_first_bidder(
            Combiner::additive(vec![1.0, 1.0]),
            vec![
                SlopeFunction::linear(0.5, 1.0),
                SlopeFunction::linear(0.3, 0.6),
            ],
            SignalCopula::gaussian(2, 0.5).unwrap(),
        )
        .unwrap();
        let z = Covariates::scalar(&[1.0, 1.0]).unwrap();
        let (f, s) = compare_formats(&m, &z, 100_000, 21, &SolveOptions::default()).unwrap();
        let se = (f.std_error.powi(2) + s.std_error.powi(2)).sqrt();
        assert!(s.revenue >= f.revenue - 3.0 * se, "{f:?} {s:?}");
    }
}
