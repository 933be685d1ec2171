//! Two-bidder slope recovery: the ODE for Gamma(alpha | Z) = (Z_i' gamma_i(alpha), Z_j' gamma_j(G_j B_i(alpha | Z))).
//!
//! With tau = G_j B_i, U = Phi(Gamma) gives
//!   Z_j' d_{Z_j} U = Phi_j (Gamma_j + Z_j' gamma_j'(tau) Z_j' d_{Z_j} tau)
//!   d_alpha U      = Phi_i Gamma_i' + Phi_j Gamma_j'
//! so Gamma_j' = tau_alpha (Z_j' d_{Z_j} U / Phi_j - Gamma_j) / (Z_j' d_{Z_j} tau). The
//! ratio r = Z_j' d_{Z_j} tau / tau_alpha vanishes at both ends; the Gamma_j equation
//! relaxes towards its target in the direction of increasing alpha when r > 0, so the
//! march runs forward from alpha = 0 then, and backward from alpha = 1 when r < 0.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use super::phi::PhiFn;
use crate::error::{Error, Result};
use crate::field::{directional, AuctionField};
use crate::model::Covariates;
use crate::numerics::diff::central5;
use crate::numerics::interp::CubicHermite;
use crate::numerics::linspace;
use crate::numerics::ode::{dopri5, OdeOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MarchOptions {
    /// The march covers [eps, 1 - eps]; endpoints are attached from their limits.
    pub eps: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Output points along the path.
    pub path_points: usize,
}

impl Default for MarchOptions {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            rtol: 1e-10,
            atol: 1e-12,
            path_points: 1001,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverTrace {
    pub z: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Gamma(alpha | Z) per alpha (n entries; zero for bidders outside the system).
    pub state: Vec<Vec<f64>>,
    /// Condition number of the alpha(1-alpha)-regularized system matrix.
    pub condition: Vec<f64>,
    pub rejected_steps: usize,
    pub forward: bool,
    /// |Gamma at the attached endpoint - continuation of the march|.
    pub endpoint_gap: f64,
}

/// Gamma paths as interpolants over alpha, one per bidder in the system.
pub struct GammaPath {
    pub bidders: Vec<usize>,
    pub curves: Vec<CubicHermite>,
    pub trace: SolverTrace,
}

impl GammaPath {
    pub fn value(&self, k: usize, alpha: f64) -> f64 {
        self.curves[k].eval(alpha.clamp(0.0, 1.0))
    }
}

/// Z_j' d_{Z_j} f(Z) by differentiating f(Z with Z_j scaled by 1 + s) at s = 0.
pub fn scale_derivative<G: Fn(&Covariates) -> Result<f64>>(
    f: G,
    z: &Covariates,
    j: usize,
) -> Result<f64> {
    let mut err = None;
    let d = central5(
        |s| match f(&z.scale_bidder(j, 1.0 + s)) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                f64::NAN
            }
        },
        0.0,
        1e-3,
    );
    match err {
        Some(e) => Err(e),
        None => Ok(d),
    }
}

struct Local {
    /// d tau / d alpha.
    ta: f64,
    /// Z_j' d_{Z_j} tau.
    tz: f64,
    ua: f64,
    /// Z_j' d_{Z_j} U.
    uz: f64,
}

fn local<F: AuctionField + ?Sized>(
    field: &F,
    j: usize,
    alpha: f64,
    z: &Covariates,
) -> Result<Local> {
    Ok(Local {
        ta: field.gb_deriv(j, alpha, z)?,
        tz: directional(&field.gb_zgrad(j, alpha, z)?, z, j),
        ua: field.u_alpha(alpha, z)?,
        uz: scale_derivative(|zz| field.u(alpha, zz), z, j)?,
    })
}

fn point(i: usize, j: usize, gi: f64, gj: f64) -> Vec<f64> {
    let mut x = vec![0.0; 2];
    x[i] = gi;
    x[j] = gj;
    x
}

/// (Gamma_i', Gamma_j') at state (gi, gj).
fn rhs<P: PhiFn + ?Sized>(
    phi: &P,
    i: usize,
    j: usize,
    loc: &Local,
    gi: f64,
    gj: f64,
) -> Result<(f64, f64)> {
    let x = point(i, j, gi, gj);
    let pi = phi.partial(i, &x)?;
    let pj = phi.partial(j, &x)?;
    if !(pi > 0.0 && pj > 0.0) {
        return Err(Error::numerical(
            format!("Phi-hat partials not positive at {x:?}"),
            None,
        ));
    }
    let dj = loc.ta * (loc.uz / pj - gj) / loc.tz;
    Ok(((loc.ua - pj * dj) / pi, dj))
}

fn condition<P: PhiFn + ?Sized>(
    phi: &P,
    i: usize,
    j: usize,
    loc: &Local,
    gi: f64,
    gj: f64,
    alpha: f64,
) -> f64 {
    let x = point(i, j, gi, gj);
    let (Ok(pi), Ok(pj)) = (phi.partial(i, &x), phi.partial(j, &x)) else {
        return f64::INFINITY;
    };
    let m = Matrix2::new(pi, pj, 0.0, pj * loc.tz / (loc.ta * alpha * (1.0 - alpha)));
    let sv = m.singular_values();
    sv.max() / sv.min()
}

/// Sign of the ratio r on the interior; a sign change is a rank failure.
fn orientation<F: AuctionField + ?Sized>(field: &F, j: usize, z: &Covariates) -> Result<bool> {
    let mut signs = Vec::new();
    for a in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let tz = directional(&field.gb_zgrad(j, a, z)?, z, j);
        let ta = field.gb_deriv(j, a, z)?;
        signs.push(tz / ta);
    }
    if signs.iter().all(|r| *r > 0.0) {
        Ok(true)
    } else if signs.iter().all(|r| *r < 0.0) {
        Ok(false)
    } else {
        Err(Error::diagnostic(format!(
            "covariate response of G_j B_i changes sign or vanishes at Z = {:?}: {signs:?}",
            z.values()
        )))
    }
}

/// Gamma(0 | Z) from U(0|Z) = Phi(Gamma) and Z_j' d_{Z_j} U(0|Z) = Phi_j(Gamma) Gamma_j.
fn initial_state<F: AuctionField + ?Sized, P: PhiFn + ?Sized>(
    field: &F,
    phi: &P,
    i: usize,
    j: usize,
    z: &Covariates,
    guess: (f64, f64),
) -> Result<(f64, f64)> {
    let u0 = field.u(0.0, z)?;
    let uz0 = scale_derivative(|zz| field.u(0.0, zz), z, j)?;
    let resid = |g: (f64, f64)| -> Result<(f64, f64)> {
        let x = point(i, j, g.0, g.1);
        Ok((phi.eval(&x)? - u0, phi.partial(j, &x)? * g.1 - uz0))
    };
    let mut g = guess;
    for _ in 0..60 {
        let r = resid(g)?;
        if r.0.abs().max(r.1.abs()) < 1e-14 * (1.0 + u0.abs()) {
            return Ok(g);
        }
        let h = 1e-6 * (1.0 + g.0.abs().max(g.1.abs()));
        let r1 = resid((g.0 + h, g.1))?;
        let r2 = resid((g.0, g.1 + h))?;
        let m = Matrix2::new(
            (r1.0 - r.0) / h,
            (r2.0 - r.0) / h,
            (r1.1 - r.1) / h,
            (r2.1 - r.1) / h,
        );
        let step = m
            .try_inverse()
            .ok_or_else(|| Error::numerical("singular Jacobian for the initial state", None))?
            * nalgebra::Vector2::new(r.0, r.1);
        let mut lam = 1.0;
        loop {
            let cand = (g.0 - lam * step[0], g.1 - lam * step[1]);
            if cand.0 > 0.0 && cand.1 > 0.0 {
                if let Ok(rc) = resid(cand) {
                    if rc.0.abs().max(rc.1.abs()) < r.0.abs().max(r.1.abs()) || lam < 1e-3 {
                        g = cand;
                        break;
                    }
                }
            }
            lam *= 0.5;
            if lam < 1e-6 {
                return Err(Error::numerical(
                    "Newton for the initial state stalled",
                    Some(r.0.abs().max(r.1.abs())),
                ));
            }
        }
    }
    let r = resid(g)?;
    if r.0.abs().max(r.1.abs()) < 1e-9 * (1.0 + u0.abs()) {
        Ok(g)
    } else {
        Err(Error::numerical(
            "Newton for the initial state did not converge",
            Some(r.0.abs().max(r.1.abs())),
        ))
    }
}

/// One implicit Euler step of length h (signed) from state y0 at a0.
fn implicit_step<F: AuctionField + ?Sized, P: PhiFn + ?Sized>(
    field: &F,
    phi: &P,
    i: usize,
    j: usize,
    z: &Covariates,
    a0: f64,
    y0: (f64, f64),
    h: f64,
) -> Result<(f64, f64)> {
    let a1 = a0 + h;
    let loc = local(field, j, a1, z)?;
    let mut y = y0;
    for _ in 0..100 {
        let x = point(i, j, y.0, y.1);
        let pi = phi.partial(i, &x)?;
        let pj = phi.partial(j, &x)?;
        let k = h * loc.ta / loc.tz;
        let gj = (y0.1 + k * loc.uz / pj) / (1.0 + k);
        let dj = (gj - y0.1) / h;
        let gi = y0.0 + h * (loc.ua - pj * dj) / pi;
        let change = (gi - y.0).abs().max((gj - y.1).abs());
        y = (gi, gj);
        if change < 1e-15 * (1.0 + gi.abs()) {
            break;
        }
    }
    Ok(y)
}

/// Solve for Gamma on [0, 1] at one covariate point. `terminal[k]` is gamma_k(1) (D-vector).
pub fn solve_path_n2<F: AuctionField + ?Sized, P: PhiFn + ?Sized>(
    field: &F,
    phi: &P,
    terminal: &[Vec<f64>],
    z: &Covariates,
    opts: &MarchOptions,
) -> Result<GammaPath> {
    if field.n() != 2 {
        return Err(Error::invalid("two-bidder solver needs n = 2"));
    }
    let i = field.bidder();
    let j = 1 - i;
    let eps = opts.eps;
    let end = (z.dot(i, &terminal[i]), z.dot(j, &terminal[j]));
    let forward = orientation(field, j, z)?;

    let ode = OdeOptions {
        rtol: opts.rtol,
        atol: opts.atol,
        ..OdeOptions::default()
    };
    let f = |a: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        let loc = local(field, j, a, z)?;
        let (di, dj) = rhs(phi, i, j, &loc, y[0], y[1])?;
        dy[0] = di;
        dy[1] = dj;
        Ok(())
    };

    let (anchor_a, anchor, first_a, first) = if forward {
        let guess = (0.5 * end.0, 0.5 * end.1);
        let g0 = initial_state(field, phi, i, j, z, guess)?;
        let g1 = implicit_step(field, phi, i, j, z, 0.0, g0, eps)?;
        (0.0, g0, eps, g1)
    } else {
        let g1 = implicit_step(field, phi, i, j, z, 1.0, end, -eps)?;
        (1.0, end, 1.0 - eps, g1)
    };
    let grid = linspace(eps, 1.0 - eps, opts.path_points.max(3));
    let outputs: Vec<f64> = if forward {
        grid[1..].to_vec()
    } else {
        grid.iter().rev().skip(1).cloned().collect()
    };
    let sol = dopri5(f, first_a, &[first.0, first.1], &outputs, ode)?;

    // Assemble increasing-alpha arrays.
    let mut rows: Vec<(f64, f64, f64, f64, f64)> = Vec::with_capacity(outputs.len() + 3);
    let slope0 = (
        (first.0 - anchor.0) / (first_a - anchor_a),
        (first.1 - anchor.1) / (first_a - anchor_a),
    );
    rows.push((anchor_a, anchor.0, anchor.1, slope0.0, slope0.1));
    rows.push((first_a, first.0, first.1, slope0.0, slope0.1));
    for (k, &a) in sol.t.iter().enumerate() {
        rows.push((a, sol.y[k][0], sol.y[k][1], sol.dy[k][0], sol.dy[k][1]));
    }
    // The far end: attach the terminal values (forward) or extrapolate to 0 (backward).
    let last = *rows.last().unwrap();
    let far_a = if forward { 1.0 } else { 0.0 };
    let h = far_a - last.0;
    let cont = (last.1 + h * last.3, last.2 + h * last.4);
    let (far, gap) = if forward {
        (end, (end.0 - cont.0).abs().max((end.1 - cont.1).abs()))
    } else {
        (cont, 0.0)
    };
    rows.push((far_a, far.0, far.1, last.3, last.4));
    rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let alpha: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let mut curves = Vec::with_capacity(2);
    for c in 0..2 {
        let ys: Vec<f64> = rows
            .iter()
            .map(|r| if c == 0 { r.1 } else { r.2 })
            .collect();
        let ds: Vec<f64> = rows
            .iter()
            .map(|r| if c == 0 { r.3 } else { r.4 })
            .collect();
        curves.push(CubicHermite::new(alpha.clone(), ys, ds)?);
    }
    let mut state = Vec::with_capacity(rows.len());
    let mut cond = Vec::with_capacity(rows.len());
    for r in &rows {
        let mut s = vec![0.0; 2];
        s[i] = r.1;
        s[j] = r.2;
        state.push(s);
        let c = if r.0 > 0.0 && r.0 < 1.0 {
            local(field, j, r.0, z)
                .map(|loc| condition(phi, i, j, &loc, r.1, r.2, r.0))
                .unwrap_or(f64::INFINITY)
        } else {
            f64::NAN
        };
        cond.push(c);
    }
    let trace = SolverTrace {
        z: z.values().to_vec(),
        alpha,
        state,
        condition: cond,
        rejected_steps: sol.rejected,
        forward,
        endpoint_gap: gap,
    };
    Ok(GammaPath {
        bidders: vec![i, j],
        curves,
        trace,
    })
}
