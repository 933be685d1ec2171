//! Symmetric first-price equilibrium, best-response bases and best-response checks.

use crate::error::{Error, Result};
use crate::model::{Covariates, MixedSignalModel};
use crate::numerics::interp::CubicHermite;
use crate::numerics::linspace;
use crate::numerics::ode::{dopri5, OdeOptions};

use super::payoff::{expected_payoff, frontier_value, omega_ratio, SignalQuadrature};
use super::profile::{BaseCurve, BidCurve, ProfileSlice, StrategyProfile, WarpAt};

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Points of the output grid on [0, 1], which is ten times finer at the ends than
    /// in the middle (B'' grows where Omega vanishes).
    pub grid_points: usize,
    /// The march starts here; [0, start] uses the small-alpha expansion.
    pub start: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Levels checked by the best-response search (0 disables the check).
    pub test_levels: usize,
    pub quadrature: SignalQuadrature,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            grid_points: 2001,
            start: 1e-4,
            rtol: 1e-10,
            atol: 1e-13,
            test_levels: 11,
            quadrature: SignalQuadrature::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EquilibriumSolveReport {
    pub alpha: Vec<f64>,
    pub values: Vec<f64>,
    /// max |s' Omega - (v - s)| at grid midpoints, through the interpolant.
    pub max_foc_residual: f64,
    /// Largest payoff gain from deviating, over the test levels.
    pub best_response_gap: f64,
    pub ode_steps: usize,
}

/// Solve s' = (v - s) / Omega on [0, 1] with s(0) = s0.
///
/// Near 0, Omega ~ kappa alpha and v ~ s0 + d alpha, which gives
/// s ~ s0 + d alpha / (1 + kappa); the march starts from that expansion.
/// u - c sin(2 pi u) / (2 pi) on a uniform u grid, with end spacing (1 - c) times the
/// uniform one.
fn output_grid(points: usize) -> Vec<f64> {
    const C: f64 = 0.9;
    let tau = 2.0 * std::f64::consts::PI;
    let mut g: Vec<f64> = linspace(0.0, 1.0, points)
        .iter()
        .map(|&u| u - C * (tau * u).sin() / tau)
        .collect();
    g[0] = 0.0;
    g[points - 1] = 1.0;
    g
}

pub(crate) fn solve_markdown_ode<V, O>(
    v: V,
    omega: O,
    s0: f64,
    opts: &SolveOptions,
) -> Result<(CubicHermite, usize)>
where
    V: Fn(f64) -> Result<f64>,
    O: Fn(f64) -> Result<f64>,
{
    let grid = output_grid(opts.grid_points.max(3));
    let a0 = opts.start.min(0.5 * grid[1]);
    let kappa = omega(a0)? / a0;
    let d = (v(a0)? - s0) / a0;
    let slope0 = d / (1.0 + kappa);
    let y0 = s0 + slope0 * a0;
    let m = grid.len();
    let outputs: Vec<f64> = grid[1..m - 1].to_vec();
    let ode_opts = OdeOptions {
        rtol: opts.rtol,
        atol: opts.atol,
        ..OdeOptions::default()
    };
    let rhs = |a: f64, y: f64| -> Result<f64> {
        let r = (v(a)? - y) / omega(a)?;
        if !r.is_finite() {
            return Err(Error::numerical(
                format!("equilibrium ODE blew up at alpha = {a}"),
                None,
            ));
        }
        Ok(r)
    };
    let relabel = |e: Error| match e {
        Error::Numerical { message, achieved } => Error::Numerical {
            message: format!("equilibrium march failed: {message}"),
            achieved,
        },
        other => other,
    };
    let sol = dopri5(
        |a, y, dy| {
            dy[0] = rhs(a, y[0])?;
            Ok(())
        },
        a0,
        &[y0],
        &outputs,
        ode_opts,
    )
    .map_err(relabel)?;
    let mut ys = vec![s0];
    let mut ds = vec![slope0];
    for (y, dy) in sol.y.iter().zip(&sol.dy) {
        ys.push(y[0]);
        ds.push(dy[0]);
    }
    // Last cell in alpha = 1 - h w^4: copulas with upper-tail dependence make Omega
    // vanish at 1 like a power of (1 - alpha), and the substitution absorbs it.
    let am = grid[m - 2];
    let h = 1.0 - am;
    let tail = dopri5(
        |w, y, dy| {
            let w3 = w * w * w;
            dy[0] = if w3 == 0.0 {
                0.0
            } else {
                -4.0 * h * w3 * rhs(1.0 - h * w3 * w, y[0])?
            };
            Ok(())
        },
        1.0,
        &[ys[m - 2]],
        &[0.0],
        ode_opts,
    )
    .map_err(relabel)?;
    let s1 = tail.y[0][0];
    let secant = (s1 - ys[m - 2]) / h;
    ys.push(s1);
    // Keep the end slope within the monotone (Fritsch-Carlson) bound.
    ds.push(rhs(1.0, s1).unwrap_or(secant).min(3.0 * secant).max(0.0));
    Ok((
        CubicHermite::new(grid, ys, ds)?,
        sol.accepted + sol.rejected + tail.accepted + tail.rejected,
    ))
}

pub(crate) fn symmetric_slice(n: usize, z: &Covariates) -> ProfileSlice {
    ProfileSlice {
        z: z.clone(),
        curves: (0..n)
            .map(|_| BidCurve::Composed {
                base: BaseCurve::Linear { lo: 0.0, hi: 1.0 },
                warp: WarpAt::Quadratic(0.0),
                shift: 0.0,
                stretch: 1.0,
            })
            .collect(),
    }
}

/// Symmetric Bayesian-Nash equilibrium of the first-price auction at one covariate point.
pub fn solve_symmetric_fpa(
    model: &MixedSignalModel,
    z: &Covariates,
    opts: &SolveOptions,
) -> Result<(StrategyProfile, EquilibriumSolveReport)> {
    if !model.is_symmetric() {
        return Err(Error::invalid(
            "symmetric equilibrium solver needs exchangeable bidders",
        ));
    }
    let n = model.n();
    if z.n() != n || z.dim() != model.dim() {
        return Err(Error::invalid("covariate shape does not match the model"));
    }
    let slice = symmetric_slice(n, z);
    let q = &opts.quadrature;
    let v = |a: f64| frontier_value(model, &slice, 0, a, q);
    let om = |a: f64| omega_ratio(model, &slice, 0, a);
    let s0 = model.evaluate_valuation(0, &vec![0.0; n], z)?;
    if !(s0 >= 0.0) {
        return Err(Error::invalid(format!(
            "initial bid s(0) = {s0} is negative"
        )));
    }
    let (table, steps) = solve_markdown_ode(v, om, s0, opts)?;

    let mut foc: f64 = 0.0;
    let mids = linspace(0.005, 0.995, 100);
    for &a in &mids {
        let r = table.deriv(a) * om(a)? - (v(a)? - table.eval(a));
        foc = foc.max(r.abs());
    }
    let profile = StrategyProfile::tables(vec![(z.clone(), vec![table.clone(); n])])?;
    let mut gap = 0.0;
    if opts.test_levels > 0 {
        let eq = profile.slice(z)?;
        let levels = linspace(0.0, 1.0, opts.test_levels.max(2));
        gap = verify_best_response(model, &eq, 0, &levels, q)?.max_gap;
    }
    let report = EquilibriumSolveReport {
        alpha: table.xs.clone(),
        values: table.ys.clone(),
        max_foc_residual: foc,
        best_response_gap: gap,
        ode_steps: steps,
    };
    Ok((profile, report))
}

/// Bidder 1's best-response base against opponents whose strategies are the base
/// composed with the given warps.
pub fn best_response_base(
    model: &MixedSignalModel,
    warps: &[WarpAt],
    z: &Covariates,
    opts: &SolveOptions,
) -> Result<CubicHermite> {
    let n = model.n();
    if warps.len() != n {
        return Err(Error::invalid("one warp per bidder required"));
    }
    let slice = ProfileSlice {
        z: z.clone(),
        curves: warps
            .iter()
            .map(|w| BidCurve::Composed {
                base: BaseCurve::Linear { lo: 0.0, hi: 1.0 },
                warp: *w,
                shift: 0.0,
                stretch: 1.0,
            })
            .collect(),
    };
    let q = &opts.quadrature;
    let s0 = model.evaluate_valuation(0, &vec![0.0; n], z)?;
    let (table, _) = solve_markdown_ode(
        |a| frontier_value(model, &slice, 0, a, q),
        |a| omega_ratio(model, &slice, 0, a),
        s0,
        opts,
    )?;
    if table.ds.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::numerical(
            "best-response base is not strictly increasing",
            None,
        ));
    }
    Ok(table)
}

/// Slice of a profile at z, solving the best-response base when the profile has one.
pub fn slice_for(
    profile: &StrategyProfile,
    model: &MixedSignalModel,
    z: &Covariates,
    opts: &SolveOptions,
) -> Result<ProfileSlice> {
    profile.slice_with(z, |w| best_response_base(model, w, z, opts))
}

#[derive(Debug, Clone)]
pub struct GapReport {
    pub levels: Vec<f64>,
    /// Best deviation payoff minus equilibrium payoff, per level.
    pub gaps: Vec<f64>,
    pub best_bids: Vec<f64>,
    pub max_gap: f64,
}

impl GapReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_gap <= tol
    }
}

/// For each signal level, search deviation bids for a payoff gain over s_i(alpha).
pub fn verify_best_response(
    model: &MixedSignalModel,
    slice: &ProfileSlice,
    i: usize,
    levels: &[f64],
    quad: &SignalQuadrature,
) -> Result<GapReport> {
    let n = slice.n();
    let lo = (0..n)
        .map(|j| slice.bid(j, 0.0))
        .fold(f64::INFINITY, f64::min);
    let hi = (0..n)
        .map(|j| slice.bid(j, 1.0))
        .fold(f64::NEG_INFINITY, f64::max);
    let lo = lo.max(1e-12);
    let span = hi - lo;
    let bids = linspace(lo, hi + 0.02 * span, 201);
    let mut gaps = Vec::new();
    let mut best_bids = Vec::new();
    for &alpha in levels {
        let own_bid = slice.bid(i, alpha);
        let own = expected_payoff(model, slice, i, own_bid, alpha, quad)?.value;
        let pay =
            |b: f64| -> Result<f64> { Ok(expected_payoff(model, slice, i, b, alpha, quad)?.value) };
        let vals: Vec<f64> = bids.iter().map(|b| pay(*b)).collect::<Result<_>>()?;
        let k = vals
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (k, v)| {
                if *v > acc.1 {
                    (k, *v)
                } else {
                    acc
                }
            })
            .0;
        // Golden-section refinement on the neighbouring cells.
        let (mut a, mut b) = (bids[k.saturating_sub(1)], bids[(k + 1).min(bids.len() - 1)]);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (pay(c)?, pay(d)?);
        for _ in 0..60 {
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = pay(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = pay(d)?;
            }
        }
        let (bb, fb) = [(bids[k], vals[k]), (c, fc), (d, fd)]
            .into_iter()
            .fold((own_bid, own), |acc, x| if x.1 > acc.1 { x } else { acc });
        gaps.push(fb - own);
        best_bids.push(bb);
    }
    let max_gap = gaps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(GapReport {
        levels: levels.to_vec(),
        gaps,
        best_bids,
        max_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::examples;
    use crate::strategy::BaseSpec;

    #[test]
    fn uniform_ipv_closed_forms() {
        for n in [2usize, 3] {
            let m = examples::uniform_ipv(n);
            let z = Covariates::scalar(&vec![1.0; n]).unwrap();
            let opts = SolveOptions {
                test_levels: 0,
                ..Default::default()
            };
            let (p, rep) = solve_symmetric_fpa(&m, &z, &opts).unwrap();
            let s = p.slice(&z).unwrap();
            let k = (n - 1) as f64 / n as f64;
            let err = linspace(0.0, 1.0, 1001)
                .iter()
                .map(|a| (s.bid(0, *a) - k * a).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-9, "n={n} err={err}");
            assert!(rep.max_foc_residual < 1e-8);
        }
    }

    #[test]
    fn perturbed_strategy_has_positive_gap() {
        let m = examples::uniform_ipv(2);
        let z = Covariates::scalar(&[1.0, 1.0]).unwrap();
        let q = SignalQuadrature::default();
        let levels = linspace(0.1, 0.9, 5);
        let eq = StrategyProfile::symmetric_linear(2, 1e-9, 0.5, 1)
            .unwrap()
            .slice(&z)
            .unwrap();
        assert!(
            verify_best_response(&m, &eq, 0, &levels, &q)
                .unwrap()
                .max_gap
                < 1e-8
        );
        let bad = StrategyProfile::synthetic_affine(
            BaseSpec::Linear { lo: 1e-9, hi: 0.5 },
            vec![crate::strategy::Warp::Identity; 2],
            vec![(0.05, 1.0), (0.0, 1.0)],
            1,
        )
        .unwrap()
        .slice(&z)
        .unwrap();
        assert!(
            verify_best_response(&m, &bad, 0, &levels, &q)
                .unwrap()
                .max_gap
                > 1e-3
        );
    }

    #[test]
    fn interdependent_gaussian_equilibrium_is_best_response() {
        let m = examples::additive_symmetric(
            2,
            crate::model::SlopeFunction::linear(0.2, 1.0),
            crate::model::SlopeFunction::linear(0.1, 0.5),
            crate::model::SignalCopula::gaussian(2, 0.4).unwrap(),
        );
        let z = Covariates::scalar(&[1.2, 1.2]).unwrap();
        let (_, rep) = solve_symmetric_fpa(&m, &z, &SolveOptions::default()).unwrap();
        assert!(
            rep.best_response_gap <= 1e-4,
            "gap {}",
            rep.best_response_gap
        );
        assert!(rep.max_foc_residual < 1e-6, "foc {}", rep.max_foc_residual);
    }
}
