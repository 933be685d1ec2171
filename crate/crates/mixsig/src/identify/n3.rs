//! Three-bidder slope recovery: march the slope paths forward from alpha = 0.
//!
//! The frontier value density is
//!   W(alpha | Z) = sum_j g_j(alpha) int_0^{tau_k(alpha)} Phi(Z_i gamma_i(alpha), Z_j gamma_j(tau_j), Z_k gamma_k(t))
//!                  c(alpha, tau_j, t | Z) dt,
//! with tau_j = G_j B_i(alpha | Z) and k the remaining opponent. At each alpha the
//! unknowns are the slopes p of gamma_i at alpha and of gamma_j at tau_j. The alpha
//! derivative and the Z_j, Z_k scale derivatives of this identity are affine in p;
//! differentiating with the path extended linearly past its frontier with slope p,
//! evaluating at p = 0 and the unit vectors gives the 3x3 system. The path itself is
//! advanced with a Heun predictor-corrector on a grid refined geometrically at both ends.

use nalgebra::{Matrix3, Vector3};

use super::n2::{MarchOptions, SolverTrace};
use super::phi::PhiFn;
use crate::error::{Error, Result};
use crate::field::AuctionField;
use crate::model::Covariates;
use crate::numerics::quadrature::{gauss_legendre, Rule};

/// Stored slope path of one bidder: (t, gamma(t), gamma'(t)) with t increasing.
#[derive(Debug, Clone, Default)]
pub struct SlopePath {
    pub t: Vec<f64>,
    pub value: Vec<f64>,
    pub slope: Vec<f64>,
}

impl SlopePath {
    fn push(&mut self, t: f64, v: f64, s: f64) {
        self.t.push(t);
        self.value.push(v);
        self.slope.push(s);
    }

    fn pop(&mut self) {
        self.t.pop();
        self.value.pop();
        self.slope.pop();
    }

    fn frontier(&self) -> f64 {
        *self.t.last().unwrap()
    }

    /// Value at t; beyond the frontier the path continues linearly with slope `ext`.
    pub fn eval(&self, t: f64, ext: f64) -> f64 {
        let m = self.t.len();
        let last = m - 1;
        if t >= self.t[last] {
            return self.value[last] + ext * (t - self.t[last]);
        }
        if t <= self.t[0] {
            return self.value[0] + self.slope[0] * (t - self.t[0]);
        }
        let k = match self.t.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
            Ok(k) => return self.value[k],
            Err(k) => k - 1,
        };
        let h = self.t[k + 1] - self.t[k];
        let s = (t - self.t[k]) / h;
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * self.value[k]
            + (s3 - 2.0 * s2 + s) * h * self.slope[k]
            + (-2.0 * s3 + 3.0 * s2) * self.value[k + 1]
            + (s3 - s2) * h * self.slope[k + 1]
    }

    /// Extend past the frontier to 1 with the last slope and sample on a grid.
    pub fn sample(&self, grid: &[f64]) -> Vec<f64> {
        let ext = *self.slope.last().unwrap();
        grid.iter().map(|&t| self.eval(t, ext)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct N3Solution {
    /// Paths in bidder order (index = bidder).
    pub paths: Vec<SlopePath>,
    pub trace: SolverTrace,
}

struct Ctx<'a, F: AuctionField + ?Sized, P: PhiFn + ?Sized> {
    field: &'a F,
    phi: &'a P,
    i: usize,
    opp: [usize; 2],
    rule: Rule,
    panels: usize,
}

impl<F: AuctionField + ?Sized, P: PhiFn + ?Sized> Ctx<'_, F, P> {
    /// Right-hand side of the W identity built from the stored paths; `ext[m]` is the
    /// continuation slope of bidder m's path.
    fn frontier_integral(
        &self,
        paths: &[SlopePath],
        ext: &[f64; 3],
        alpha: f64,
        z: &Covariates,
    ) -> Result<f64> {
        let i = self.i;
        let taus = [
            self.field.gb(self.opp[0], alpha, z)?,
            self.field.gb(self.opp[1], alpha, z)?,
        ];
        let gs = [
            self.field.gb_deriv(self.opp[0], alpha, z)?,
            self.field.gb_deriv(self.opp[1], alpha, z)?,
        ];
        let xi = z.get(i, 0) * paths[i].eval(alpha, ext[i]);
        let mut total = 0.0;
        for c in 0..2 {
            let (j, k) = (self.opp[c], self.opp[1 - c]);
            let xj = z.get(j, 0) * paths[j].eval(taus[c], ext[j]);
            let upper = taus[1 - c].clamp(0.0, 1.0);
            if upper <= 0.0 {
                continue;
            }
            let mut err = None;
            let inner = self.rule.integrate_composite(0.0, upper, self.panels, |t| {
                let mut x = [0.0; 3];
                x[i] = xi;
                x[j] = xj;
                x[k] = z.get(k, 0) * paths[k].eval(t, ext[k]);
                let mut a = [0.0; 3];
                a[i] = alpha;
                a[j] = taus[c];
                a[k] = t;
                match (self.phi.eval(&x), self.field.signal_density(&a, z)) {
                    (Ok(v), Ok(d)) => v * d,
                    (Err(e), _) | (_, Err(e)) => {
                        err = Some(e);
                        f64::NAN
                    }
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
            total += gs[c] * inner;
        }
        Ok(total)
    }

    /// The frontier node carries the continuation slope too, so one-sided derivatives agree there.
    fn residual(
        &self,
        paths: &[SlopePath],
        ext: &[f64; 3],
        alpha: f64,
        z: &Covariates,
    ) -> Result<f64> {
        let pinned: Vec<SlopePath> = paths
            .iter()
            .zip(ext)
            .map(|(p, &e)| {
                let mut q = p.clone();
                *q.slope.last_mut().unwrap() = e;
                q
            })
            .collect();
        Ok(self.frontier_integral(&pinned, ext, alpha, z)? - self.field.w(alpha, z)?)
    }

    /// (d_alpha, Z_j d_{Z_j}, Z_k d_{Z_k}) of the residual.
    fn derivatives(
        &self,
        paths: &[SlopePath],
        ext: &[f64; 3],
        alpha: f64,
        z: &Covariates,
    ) -> Result<Vector3<f64>> {
        let h = 1e-5 * alpha.min(1.0 - alpha).min(1.0);
        let da = (self.residual(paths, ext, alpha + h, z)?
            - self.residual(paths, ext, alpha - h, z)?)
            / (2.0 * h);
        let s = 1e-5;
        let mut out = Vector3::new(da, 0.0, 0.0);
        for c in 0..2 {
            let m = self.opp[c];
            let up = self.residual(paths, ext, alpha, &z.scale_bidder(m, 1.0 + s))?;
            let dn = self.residual(paths, ext, alpha, &z.scale_bidder(m, 1.0 - s))?;
            out[c + 1] = (up - dn) / (2.0 * s);
        }
        Ok(out)
    }

    /// Frontier slopes p (by bidder index) at alpha, and the condition number of the system.
    fn solve_slopes(
        &self,
        paths: &[SlopePath],
        alpha: f64,
        z: &Covariates,
        base: &[f64; 3],
    ) -> Result<([f64; 3], f64)> {
        let order = [self.i, self.opp[0], self.opp[1]];
        let e0 = self.derivatives(paths, base, alpha, z)?;
        let mut jac = Matrix3::zeros();
        for (col, &m) in order.iter().enumerate() {
            let mut p = *base;
            p[m] += 1.0;
            let e = self.derivatives(paths, &p, alpha, z)?;
            jac.set_column(col, &(e - e0));
        }
        let sv = jac.singular_values();
        let cond = sv.max() / sv.min();
        let step = jac.lu().solve(&(-e0)).ok_or_else(|| {
            Error::diagnostic(format!("singular slope system at alpha = {alpha}"))
        })?;
        let mut p = *base;
        for (col, &m) in order.iter().enumerate() {
            p[m] += step[col];
        }
        Ok((p, cond))
    }
}

/// Alpha grid: geometric on [eps, 0.02] and [0.98, 1 - eps], uniform in between.
pub fn march_grid(eps: f64, interior_step: f64) -> Vec<f64> {
    let mut g = vec![0.0];
    let geo = |a: f64, b: f64, n: usize| -> Vec<f64> {
        (0..n)
            .map(|k| a * (b / a).powf(k as f64 / (n - 1) as f64))
            .collect()
    };
    g.extend(geo(eps, 0.02, 14));
    let m = ((0.96 / interior_step).round() as usize).max(1);
    for k in 1..m {
        g.push(0.02 + 0.96 * k as f64 / m as f64);
    }
    let tail: Vec<f64> = geo(eps, 0.02, 14)
        .into_iter()
        .rev()
        .map(|d| 1.0 - d)
        .collect();
    g.extend(tail);
    g
}

fn initial_arr(v: &[f64]) -> [f64; 3] {
    [v[0], v[1], v[2]]
}

/// Gamma = Z_m gamma_m at the frontier points.
fn gamma_state(y: &[f64; 3], z: &Covariates) -> Vec<f64> {
    (0..3).map(|m| z.get(m, 0) * y[m]).collect()
}

/// March the slope paths at covariate point z (scalar covariates), starting from gamma(0).
pub fn solve_paths_n3<F: AuctionField + ?Sized, P: PhiFn + ?Sized>(
    field: &F,
    phi: &P,
    initial: &[f64],
    z: &Covariates,
    opts: &MarchOptions,
) -> Result<N3Solution> {
    if field.n() != 3 || field.dim() != 1 {
        return Err(Error::Unsupported(
            "three-bidder march needs n = 3 and scalar covariates".into(),
        ));
    }
    let i = field.bidder();
    let opp: Vec<usize> = (0..3).filter(|&j| j != i).collect();
    let ctx = Ctx {
        field,
        phi,
        i,
        opp: [opp[0], opp[1]],
        rule: gauss_legendre(16),
        panels: 6,
    };
    let grid = march_grid(opts.eps, 0.005);

    let mut paths = vec![SlopePath::default(); 3];
    for m in 0..3 {
        paths[m].push(0.0, initial[m], 0.0);
    }
    let taus_at = |a: f64| -> Result<[f64; 3]> {
        let mut t = [0.0; 3];
        t[i] = a;
        for &m in &opp {
            t[m] = field.gb(m, a, z)?;
        }
        Ok(t)
    };
    let rates = |a: f64, p: &[f64; 3]| -> Result<[f64; 3]> {
        let mut r = [0.0; 3];
        r[i] = p[i];
        for &m in &opp {
            r[m] = p[m] * field.gb_deriv(m, a, z)?;
        }
        Ok(r)
    };

    let mut trace = SolverTrace {
        z: z.values().to_vec(),
        alpha: vec![0.0],
        state: vec![gamma_state(&initial_arr(initial), z)],
        condition: vec![f64::NAN],
        rejected_steps: 0,
        forward: true,
        endpoint_gap: 0.0,
    };

    // First step: the slopes at grid[1] with the path still a single point.
    let a1 = grid[1];
    let (mut p, cond) = ctx.solve_slopes(&paths, a1, z, &[0.0; 3])?;
    let t1 = taus_at(a1)?;
    let mut y = [0.0; 3];
    for m in 0..3 {
        y[m] = initial[m] + p[m] * t1[m];
        paths[m].slope[0] = p[m];
        paths[m].push(t1[m], y[m], p[m]);
    }
    trace.alpha.push(a1);
    trace.state.push(gamma_state(&y, z));
    trace.condition.push(cond);

    let mut f_n = rates(a1, &p)?;
    for w in grid[1..].windows(2) {
        let (a0, a1) = (w[0], w[1]);
        let h = a1 - a0;
        let t1 = taus_at(a1)?;
        let pred: Vec<f64> = (0..3).map(|m| y[m] + h * f_n[m]).collect();
        for m in 0..3 {
            paths[m].push(t1[m], pred[m], p[m]);
        }
        let (p1, cond) = ctx.solve_slopes(&paths, a1, z, &p)?;
        let f1 = rates(a1, &p1)?;
        for m in 0..3 {
            paths[m].pop();
            y[m] += 0.5 * h * (f_n[m] + f1[m]);
            if !(t1[m] > paths[m].frontier()) {
                return Err(Error::diagnostic(format!(
                    "G_j B_i is not increasing for bidder {} near alpha = {a1}",
                    m + 1
                )));
            }
            paths[m].push(t1[m], y[m], p1[m]);
        }
        p = p1;
        f_n = f1;
        trace.alpha.push(a1);
        trace.state.push(gamma_state(&y, z));
        trace.condition.push(cond);
    }
    Ok(N3Solution { paths, trace })
}

/// Sup over `alphas` of |F - W| for finished paths (continued with their last slope).
pub fn w_residual<F: AuctionField + ?Sized, P: PhiFn + ?Sized>(
    field: &F,
    phi: &P,
    paths: &[SlopePath],
    alphas: &[f64],
    z: &Covariates,
) -> Result<f64> {
    let i = field.bidder();
    let opp: Vec<usize> = (0..3).filter(|&j| j != i).collect();
    let ctx = Ctx {
        field,
        phi,
        i,
        opp: [opp[0], opp[1]],
        rule: gauss_legendre(16),
        panels: 6,
    };
    let ext = [0, 1, 2].map(|m| *paths[m].slope.last().unwrap());
    let mut worst = 0.0f64;
    for &a in alphas {
        worst = worst.max(ctx.residual(paths, &ext, a, z)?.abs());
    }
    Ok(worst)
}
