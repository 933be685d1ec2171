//! Recover (Phi, gamma) for one bidder from its auction field.
//!
//! The combiner and the endpoint slopes come from U at one end of the unit interval;
//! the slope paths come from the two-bidder ODE, the three-bidder forward march, or,
//! when Phi depends on a single mixed signal, from inverting Phi directly.

pub mod n2;
pub mod n3;
pub mod phi;
pub mod steps;
pub mod wilson;

pub use n2::{solve_path_n2, GammaPath, MarchOptions, SolverTrace};
pub use n3::{march_grid, solve_paths_n3, w_residual, N3Solution, SlopePath};
pub use phi::{u_limit, FieldPhi, PhiFn, PhiTable};
pub use steps::{
    active_gradients, detect_active_set, field_phi, recover_endpoint_slopes, recover_phi,
    LimitSchedule, Route,
};
pub use wilson::recover_value_quantile;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{rank_condition_report, AuctionField, RankOptions, RankReport, RankStatus};
use crate::model::{Combiner, Covariates};
use crate::numerics::diff::neville_to_zero;
use crate::numerics::linspace;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct IdentifyOptions {
    /// Anchor end; terminal for two bidders and initial for three when unset.
    pub route: Option<Route>,
    /// Covariate points at which the slope paths are solved.
    pub z_points: Option<Vec<Covariates>>,
    /// Second set for the overidentification check; an empty list disables it.
    pub overid_points: Option<Vec<Covariates>>,
    /// Points scanned for the active set; solve and overid points when unset.
    pub detect_points: Option<Vec<Covariates>>,
    pub active_tolerance: f64,
    pub limit: LimitSchedule,
    /// Base point of the Z -> 0 limit (all ones when unset).
    pub limit_base: Option<Covariates>,
    pub alpha_points: usize,
    /// Nodes per axis of the reported Phi-hat table.
    pub phi_points: usize,
    /// Upper end of every Phi-hat axis; 2 for two bidders, 3 for three when unset.
    pub phi_upper: Option<f64>,
    /// Nodes per axis of the table the three-bidder march integrates against.
    pub n3_phi_points: usize,
    pub march: MarchOptions,
    /// Skip combiner recovery and use this (normalized) combiner instead.
    pub known_phi: Option<Combiner>,
    /// Declared accuracy; the overidentification gap warns above twice this.
    pub tolerance: f64,
    /// Largest decrease in a recovered slope that is projected away rather than refused.
    pub monotone_tolerance: f64,
    pub check_rank: bool,
}

impl Default for IdentifyOptions {
    fn default() -> Self {
        Self {
            route: None,
            z_points: None,
            overid_points: None,
            detect_points: None,
            active_tolerance: 1e-6,
            limit: LimitSchedule::default(),
            limit_base: None,
            alpha_points: 101,
            phi_points: 21,
            phi_upper: None,
            n3_phi_points: 13,
            march: MarchOptions::default(),
            known_phi: None,
            tolerance: 1e-3,
            monotone_tolerance: 1e-2,
            check_rank: true,
        }
    }
}

/// Solve points: Z_j = 1 + j/2 for scalar covariates; for D > 1 one point per
/// direction d with Z_j = (1 + j/2)(1/2 + e_d).
pub fn default_points(n: usize, dim: usize) -> Vec<Covariates> {
    if dim == 1 {
        let vals = (0..n).map(|j| 1.0 + 0.5 * j as f64).collect();
        return vec![Covariates::new(n, 1, vals).expect("valid covariates")];
    }
    (0..dim)
        .map(|d| {
            let mut vals = Vec::with_capacity(n * dim);
            for j in 0..n {
                for e in 0..dim {
                    vals.push((1.0 + 0.5 * j as f64) * (0.5 + if e == d { 1.0 } else { 0.0 }));
                }
            }
            Covariates::new(n, dim, vals).expect("valid covariates")
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentifiedPrimitives {
    /// 0-based bidder whose primitives were recovered.
    pub bidder: usize,
    pub route: Route,
    pub active: Vec<usize>,
    /// gamma_j at the anchor end (zeros for inactive bidders or a known combiner).
    pub endpoint_slopes: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    /// slopes[j][k] = gamma_j(alpha[k]) as a D-vector; None when not identified.
    pub slopes: Vec<Option<Vec<Vec<f64>>>>,
    pub phi: PhiTable,
    /// d Phi-hat / d x_j at the origin for active j; 1 under the normalization.
    pub origin_partials: Vec<Option<f64>>,
    /// Sup of the defining identity's residual along the solved paths.
    pub residual: f64,
    /// Mismatch at the anchor end (terminal gap or initial Phi-hat check).
    pub anchor_residual: f64,
    pub overid_gap: Option<f64>,
    pub rank: Option<RankReport>,
    pub warnings: Vec<String>,
    pub traces: Vec<SolverTrace>,
}

impl IdentifiedPrimitives {
    /// gamma_j(t) by linear interpolation on the alpha grid.
    pub fn slope_at(&self, j: usize, t: f64) -> Option<Vec<f64>> {
        let path = self.slopes.get(j)?.as_ref()?;
        let dim = path[0].len();
        Some(
            (0..dim)
                .map(|d| {
                    let ys: Vec<f64> = path.iter().map(|v| v[d]).collect();
                    crate::numerics::interp::linear(&self.alpha, &ys, t)
                })
                .collect(),
        )
    }
}

/// Bisection for an increasing f on [lo, hi] with error propagation.
fn solve_increasing<G: FnMut(f64) -> Result<f64>>(
    mut f: G,
    target: f64,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    if f(a)? >= target {
        return Ok(a);
    }
    if f(b)? <= target {
        return Ok(b);
    }
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if f(m)? < target {
            a = m;
        } else {
            b = m;
        }
        if b - a <= 1e-13 * (1.0 + a.abs()) {
            break;
        }
    }
    Ok(0.5 * (a + b))
}

/// alpha with G_j B_i(alpha | z) = t.
fn invert_gb<F: AuctionField + ?Sized>(field: &F, j: usize, t: f64, z: &Covariates) -> Result<f64> {
    if t <= 0.0 {
        return Ok(0.0);
    }
    if t >= 1.0 {
        return Ok(1.0);
    }
    solve_increasing(|a| field.gb(j, a, z), t, 0.0, 1.0)
}

/// x >= 0 with Phi(x e_a) = target.
fn invert_phi<P: PhiFn + ?Sized>(phi: &P, a: usize, target: f64) -> Result<f64> {
    let n = phi.n();
    let eval = |x: f64| -> Result<f64> {
        let mut v = vec![0.0; n];
        v[a] = x;
        phi.eval(&v)
    };
    let mut hi = 1.0;
    let mut tries = 0;
    while eval(hi)? < target {
        hi *= 2.0;
        tries += 1;
        if tries > 40 {
            return Err(Error::numerical(
                format!("Phi-hat never reaches {target}"),
                None,
            ));
        }
    }
    solve_increasing(eval, target, 0.0, hi)
}

/// Least-squares gamma from Gamma(z) = Z_j' gamma over the solve points.
fn fit_slope(zs: &[Covariates], j: usize, gammas: &[f64]) -> Result<Vec<f64>> {
    let dim = zs[0].dim();
    let a = DMatrix::from_fn(zs.len(), dim, |r, d| zs[r].get(j, d));
    let b = DVector::from_column_slice(gammas);
    let sol = a
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| Error::numerical(format!("slope least squares: {e}"), None))?;
    Ok(sol.iter().cloned().collect())
}

struct Recovery {
    slopes: Vec<Option<Vec<Vec<f64>>>>,
    traces: Vec<SolverTrace>,
    residual: f64,
    anchor_residual: f64,
}

#[allow(clippy::too_many_arguments)]
fn recover_slopes<F: AuctionField + ?Sized>(
    field: &F,
    phi: &dyn PhiFn,
    route: Route,
    active: &[usize],
    endpoint: Option<&[Vec<f64>]>,
    zs: &[Covariates],
    grid: &[f64],
    opts: &IdentifyOptions,
) -> Result<Recovery> {
    let n = field.n();
    let i = field.bidder();
    // gammas[j][z][k] = Gamma_j at the grid point k of bidder j's own argument.
    let mut gammas: Vec<Vec<Vec<f64>>> = vec![Vec::new(); n];
    let mut traces = Vec::new();
    let mut residual = 0.0f64;
    let mut anchor_residual = 0.0f64;
    let interior: Vec<f64> = grid
        .iter()
        .cloned()
        .filter(|&a| a > 0.005 && a < 0.995)
        .collect();

    if active.len() == 1 {
        let a = active[0];
        for z in zs {
            let mut row = Vec::with_capacity(grid.len());
            for &t in grid {
                let alpha = if a == i {
                    t
                } else {
                    invert_gb(field, a, t, z)?
                };
                let target = u_limit(field, alpha, z)?;
                let x = invert_phi(phi, a, target)?;
                let mut v = vec![0.0; n];
                v[a] = x;
                residual = residual.max((phi.eval(&v)? - target).abs());
                row.push(x);
            }
            gammas[a].push(row);
        }
    } else if n == 2 {
        if route != Route::Terminal {
            return Err(Error::Unsupported(
                "the two-bidder march is anchored at alpha = 1".into(),
            ));
        }
        let endpoint = endpoint.ok_or_else(|| Error::invalid("endpoint slopes required"))?;
        let j = 1 - i;
        for z in zs {
            let path = solve_path_n2(field, phi, endpoint, z, &opts.march)?;
            gammas[i].push(grid.iter().map(|&a| path.value(0, a)).collect());
            let mut row = Vec::with_capacity(grid.len());
            for &t in grid {
                row.push(path.value(1, invert_gb(field, j, t, z)?));
            }
            gammas[j].push(row);
            for &a in &interior {
                let mut x = vec![0.0; 2];
                x[i] = path.value(0, a);
                x[j] = path.value(1, a);
                residual = residual.max((phi.eval(&x)? - field.u(a, z)?).abs());
            }
            anchor_residual = anchor_residual.max(path.trace.endpoint_gap);
            traces.push(path.trace);
        }
    } else {
        if route != Route::Initial {
            return Err(Error::Unsupported(
                "the three-bidder march is anchored at alpha = 0".into(),
            ));
        }
        if active.len() != 3 {
            return Err(Error::Unsupported(
                "three-bidder march needs every mixed signal active (or exactly one)".into(),
            ));
        }
        let endpoint = endpoint.ok_or_else(|| Error::invalid("endpoint slopes required"))?;
        let initial: Vec<f64> = endpoint.iter().map(|g| g[0]).collect();
        let checks = [0.1, 0.3, 0.5, 0.7, 0.9];
        for z in zs {
            let x0: Vec<f64> = (0..3).map(|m| z.get(m, 0) * initial[m]).collect();
            anchor_residual = anchor_residual.max((phi.eval(&x0)? - u_limit(field, 0.0, z)?).abs());
            let sol = solve_paths_n3(field, phi, &initial, z, &opts.march)?;
            for m in 0..3 {
                let zm = z.get(m, 0);
                gammas[m].push(
                    sol.paths[m]
                        .sample(grid)
                        .into_iter()
                        .map(|g| zm * g)
                        .collect(),
                );
            }
            residual = residual.max(w_residual(field, phi, &sol.paths, &checks, z)?);
            traces.push(sol.trace);
        }
    }

    let mut slopes = vec![None; n];
    for j in 0..n {
        if gammas[j].is_empty() {
            continue;
        }
        let mut path = Vec::with_capacity(grid.len());
        for k in 0..grid.len() {
            let col: Vec<f64> = gammas[j].iter().map(|row| row[k]).collect();
            path.push(fit_slope(zs, j, &col)?);
        }
        slopes[j] = Some(path);
    }
    Ok(Recovery {
        slopes,
        traces,
        residual,
        anchor_residual,
    })
}

/// Largest decrease along each component; cummax projection when within tolerance.
fn project_monotone(
    slopes: &mut [Option<Vec<Vec<f64>>>],
    tolerance: f64,
    warnings: &mut Vec<String>,
) -> Result<()> {
    for (j, path) in slopes.iter_mut().enumerate() {
        let Some(path) = path else { continue };
        let dim = path[0].len();
        for d in 0..dim {
            let mut run = f64::NEG_INFINITY;
            let mut worst = 0.0f64;
            for v in path.iter_mut() {
                worst = worst.max(run - v[d]);
                run = run.max(v[d]);
                v[d] = run;
            }
            if worst > tolerance {
                return Err(Error::diagnostic(format!(
                    "recovered slope of bidder {} (component {}) decreases by {worst:.3e}",
                    j + 1,
                    d + 1
                )));
            }
            if worst > 0.0 {
                warnings.push(format!(
                    "slope of bidder {} (component {}) projected onto nondecreasing paths (gap {worst:.3e})",
                    j + 1,
                    d + 1
                ));
            }
        }
    }
    Ok(())
}

fn origin_partial(phi: &dyn PhiFn, j: usize) -> Result<f64> {
    let hs = [0.02, 0.01, 0.005];
    let vals = hs
        .iter()
        .map(|&h| {
            let mut x = vec![0.0; phi.n()];
            x[j] = h;
            phi.partial(j, &x)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(*neville_to_zero(&hs, &vals).last().unwrap())
}

/// Two-bidder slope paths on `grid` for a given combiner and terminal slopes, without
/// recovering either from the field.
pub fn slopes_given_phi<F: AuctionField + ?Sized>(
    field: &F,
    phi: &dyn PhiFn,
    terminal: &[Vec<f64>],
    zs: &[Covariates],
    grid: &[f64],
    march: &MarchOptions,
) -> Result<Vec<Option<Vec<Vec<f64>>>>> {
    if field.n() != 2 {
        return Err(Error::invalid(
            "slope paths for a given combiner need n = 2",
        ));
    }
    let opts = IdentifyOptions {
        march: *march,
        ..Default::default()
    };
    Ok(recover_slopes(
        field,
        phi,
        Route::Terminal,
        &[0, 1],
        Some(terminal),
        zs,
        grid,
        &opts,
    )?
    .slopes)
}

/// Run the full recovery for the field's bidder.
pub fn identify<F: AuctionField + ?Sized>(
    field: &F,
    opts: &IdentifyOptions,
) -> Result<IdentifiedPrimitives> {
    let n = field.n();
    let dim = field.dim();
    let i = field.bidder();
    if n != 2 && n != 3 {
        return Err(Error::Unsupported(format!(
            "identification is implemented for 2 or 3 bidders, got {n}"
        )));
    }
    let route = opts.route.unwrap_or(if n == 2 {
        Route::Terminal
    } else {
        Route::Initial
    });
    let zs = opts
        .z_points
        .clone()
        .unwrap_or_else(|| default_points(n, dim));
    let overid = opts
        .overid_points
        .clone()
        .unwrap_or_else(|| zs.iter().map(|z| z.scale_all(1.2)).collect());
    for z in zs.iter().chain(&overid) {
        if z.n() != n || z.dim() != dim {
            return Err(Error::invalid(
                "covariate point does not match the field's shape",
            ));
        }
    }
    if zs.is_empty() {
        return Err(Error::invalid("no solve points"));
    }
    let mut warnings = Vec::new();
    let upper = opts.phi_upper.unwrap_or(if n == 2 { 2.0 } else { 3.0 });

    let active = match &opts.known_phi {
        Some(c) => {
            if c.arity() != n {
                return Err(Error::invalid(
                    "known combiner arity differs from the number of bidders",
                ));
            }
            c.active_set()
        }
        None => {
            let detect = opts
                .detect_points
                .clone()
                .unwrap_or_else(|| zs.iter().chain(&overid).cloned().collect());
            detect_active_set(field, route, &detect, opts.active_tolerance)?
        }
    };
    let need_endpoint = opts.known_phi.is_none() || active.len() > 1;
    let endpoint = if need_endpoint {
        let base = opts
            .limit_base
            .clone()
            .unwrap_or_else(|| Covariates::new(n, dim, vec![1.0; n * dim]).unwrap());
        Some(recover_endpoint_slopes(
            field,
            route,
            &active,
            &base,
            &opts.limit,
        )?)
    } else {
        None
    };

    let rank = if opts.check_rank && active.iter().any(|&j| j != i) {
        let candidate: Vec<usize> = active.iter().cloned().filter(|&j| j != i).collect();
        let alphas = linspace(0.1, 0.9, 9);
        let report = rank_condition_report(
            field,
            &candidate,
            Some(&active),
            &alphas,
            &zs,
            &RankOptions::default(),
        )?;
        if report.status == RankStatus::Fail {
            let p = report.first_failure().unwrap();
            return Err(Error::diagnostic(format!(
                "rank condition fails at alpha = {}, Z = {:?} (smallest singular value {:.3e})",
                p.alpha, p.z, p.min_singular_value
            )));
        }
        Some(report)
    } else {
        None
    };

    let axes = |m: usize| vec![linspace(0.0, upper, m); active.len()];
    let field_fn = endpoint
        .as_ref()
        .map(|e| field_phi(field, route, &active, e));
    let (solver_phi, table): (Box<dyn PhiFn + '_>, PhiTable) = match (&opts.known_phi, &field_fn) {
        (Some(c), _) => (
            Box::new(c.clone()),
            PhiTable::build(c, &active, axes(opts.phi_points))?,
        ),
        (None, Some(fp)) => {
            if let Some(&j) = active
                .iter()
                .find(|&&j| endpoint.as_ref().unwrap()[j].iter().all(|v| *v == 0.0))
            {
                return Err(Error::diagnostic(format!(
                    "endpoint slope of active bidder {} is zero",
                    j + 1
                )));
            }
            if n == 3 && active.len() > 1 {
                let t = PhiTable::build(fp, &active, axes(opts.n3_phi_points))?;
                (Box::new(t.clone()), t)
            } else {
                let fp2 = field_phi(field, route, &active, endpoint.as_ref().unwrap());
                (
                    Box::new(fp2),
                    PhiTable::build(fp, &active, axes(opts.phi_points))?,
                )
            }
        }
        (None, None) => unreachable!("endpoint slopes are recovered whenever Phi is"),
    };
    let origin_partials = (0..n)
        .map(|j| {
            if active.contains(&j) {
                origin_partial(&*solver_phi, j).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let grid = linspace(0.0, 1.0, opts.alpha_points);
    let ep = endpoint.as_deref();
    let mut main = recover_slopes(field, &*solver_phi, route, &active, ep, &zs, &grid, opts)?;
    if let (Route::Terminal, Some(e)) = (route, ep) {
        if let Some(last) = grid.last() {
            if *last >= 1.0 {
                for &j in &active {
                    if let Some(path) = main.slopes[j].as_mut() {
                        *path.last_mut().unwrap() = e[j].clone();
                    }
                }
            }
        }
    }
    project_monotone(&mut main.slopes, opts.monotone_tolerance, &mut warnings)?;

    let overid_gap = if overid.is_empty() {
        None
    } else {
        let mut other = recover_slopes(
            field,
            &*solver_phi,
            route,
            &active,
            ep,
            &overid,
            &grid,
            opts,
        )?;
        let mut scratch = Vec::new();
        project_monotone(&mut other.slopes, f64::INFINITY, &mut scratch)?;
        let mut gap = 0.0f64;
        for j in 0..n {
            if let (Some(a), Some(b)) = (&main.slopes[j], &other.slopes[j]) {
                for (k, &t) in grid.iter().enumerate() {
                    if t > 0.005 && t < 0.995 {
                        for d in 0..dim {
                            gap = gap.max((a[k][d] - b[k][d]).abs());
                        }
                    }
                }
            }
        }
        if gap > 2.0 * opts.tolerance {
            warnings.push(format!(
                "slopes from the two covariate sets differ by {gap:.3e}; the model may be misspecified"
            ));
        }
        Some(gap)
    };

    Ok(IdentifiedPrimitives {
        bidder: i,
        route,
        active,
        endpoint_slopes: endpoint.unwrap_or_else(|| vec![vec![0.0; dim]; n]),
        alpha: grid,
        slopes: main.slopes,
        phi: table,
        origin_partials,
        residual: main.residual,
        anchor_residual: main.anchor_residual,
        overid_gap,
        rank,
        warnings,
        traces: main.traces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::OracleField;
    use crate::model::{examples, SignalCopula, SlopeFunction};
    use crate::strategy::{BaseSpec, StrategyProfile};

    fn canonical_pair() -> OracleField {
        let m = examples::from_first_bidder(
            Combiner::bilinear_interaction(),
            vec![
                SlopeFunction::linear(0.5, 1.0),
                SlopeFunction::linear(0.4, 1.0),
            ],
            SignalCopula::independence(2),
        )
        .unwrap();
        let p = StrategyProfile::canonical(2, BaseSpec::Linear { lo: 0.1, hi: 0.9 }).unwrap();
        OracleField::from_model(m, p, 0).unwrap()
    }

    #[test]
    fn two_bidder_canonical_recovery() {
        let f = canonical_pair();
        let opts = IdentifyOptions {
            overid_points: Some(vec![]),
            ..Default::default()
        };
        let out = identify(&f, &opts).unwrap();
        assert_eq!(out.active, vec![0, 1]);
        let phi_err = out
            .phi
            .sup_error(&Combiner::bilinear_interaction())
            .unwrap();
        let truth = [
            SlopeFunction::linear(0.5, 1.0),
            SlopeFunction::linear(0.4, 1.0),
        ];
        let mut worst = 0.0f64;
        for j in 0..2 {
            let path = out.slopes[j].as_ref().unwrap();
            for (k, &t) in out.alpha.iter().enumerate() {
                worst = worst.max((path[k][0] - truth[j].component(0, t)).abs());
            }
        }
        assert!(phi_err < 1e-4, "{phi_err}");
        assert!(worst < 1e-3, "{worst}");
    }

    #[test]
    fn three_bidder_additive_recovery() {
        let truth = vec![
            SlopeFunction::linear(0.3, 0.9),
            SlopeFunction::linear(0.4, 1.0),
            SlopeFunction::linear(0.5, 0.8),
        ];
        let m = examples::from_first_bidder(
            Combiner::additive(vec![1.0; 3]),
            truth.clone(),
            SignalCopula::independence(3),
        )
        .unwrap();
        let p = StrategyProfile::canonical(3, BaseSpec::Linear { lo: 0.1, hi: 0.9 }).unwrap();
        let f = OracleField::from_model(m, p, 0).unwrap();
        let opts = IdentifyOptions {
            overid_points: Some(vec![]),
            ..Default::default()
        };
        let out = identify(&f, &opts).unwrap();
        assert_eq!(out.active, vec![0, 1, 2]);
        let mut worst = 0.0f64;
        for j in 0..3 {
            let path = out.slopes[j].as_ref().unwrap();
            for (k, &t) in out.alpha.iter().enumerate() {
                worst = worst.max((path[k][0] - truth[j].component(0, t)).abs());
            }
        }
        assert!(worst < 1e-2, "{worst}");
    }

    #[test]
    fn rescaled_generators_give_the_same_tables() {
        let base = canonical_pair();
        let opts = IdentifyOptions {
            overid_points: Some(vec![]),
            ..Default::default()
        };
        let reference = identify(&base, &opts).unwrap();
        for &lambda in &[0.5, 3.0] {
            let m = base.model().unwrap().rescale(lambda).unwrap();
            let f = OracleField::from_model(m, base.profile().clone(), 0).unwrap();
            let out = identify(&f, &opts).unwrap();
            let phi_gap = crate::numerics::sup_diff(&out.phi.values, &reference.phi.values);
            let mut slope_gap = 0.0f64;
            for j in 0..2 {
                let (a, b) = (
                    out.slopes[j].as_ref().unwrap(),
                    reference.slopes[j].as_ref().unwrap(),
                );
                for k in 0..a.len() {
                    slope_gap = slope_gap.max((a[k][0] - b[k][0]).abs());
                }
            }
            assert!(
                phi_gap < 1e-6 && slope_gap < 1e-6,
                "lambda {lambda}: {phi_gap} {slope_gap}"
            );
        }
    }

    #[test]
    fn known_private_combiner_inverts_directly() {
        let m = examples::from_first_bidder(
            Combiner::additive(vec![1.0, 0.0]),
            vec![
                SlopeFunction::linear(0.5, 1.0),
                SlopeFunction::linear(0.4, 1.0),
            ],
            SignalCopula::independence(2),
        )
        .unwrap();
        let p = StrategyProfile::symmetric_linear(2, 0.1, 0.5, 1).unwrap();
        let f = OracleField::from_model(m, p, 0).unwrap();
        let opts = IdentifyOptions {
            known_phi: Some(Combiner::additive(vec![1.0, 0.0])),
            ..Default::default()
        };
        let out = identify(&f, &opts).unwrap();
        assert_eq!(out.active, vec![0]);
        assert!(out.slopes[1].is_none());
        let path = out.slopes[0].as_ref().unwrap();
        for (k, &t) in out.alpha.iter().enumerate() {
            assert!((path[k][0] - (0.5 + 0.5 * t)).abs() < 1e-8);
        }
        assert!(out.overid_gap.unwrap() < 1e-8);
    }

    #[test]
    fn symmetric_two_bidder_field_is_refused() {
        let m = examples::from_first_bidder(
            Combiner::bilinear_interaction(),
            vec![
                SlopeFunction::linear(0.5, 1.0),
                SlopeFunction::linear(0.4, 1.0),
            ],
            SignalCopula::independence(2),
        )
        .unwrap();
        let p = StrategyProfile::symmetric_linear(2, 0.1, 0.5, 1).unwrap();
        let f = OracleField::from_model(m, p, 0).unwrap();
        let err = identify(&f, &IdentifyOptions::default()).unwrap_err();
        assert!(format!("{err}").contains("rank condition"), "{err}");
    }
}
