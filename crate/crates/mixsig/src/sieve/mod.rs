//! Two-stage sieve estimator for two bidders.
//!
//! Stage one tabulates U-hat and G_jB_i-hat on an (alpha, Z) design. Stage two minimises
//!   J = sum_{Z, alpha} w (U-hat(alpha | Z) - Phi[Z_i' gamma_i(alpha), Z_j' gamma_j(G_jB_i(alpha | Z))])^2
//! over a polynomial sieve for Phi (with dPhi/dx_j(0) = 1 imposed for active j) and
//! monotone Bernstein sieves for the slopes, alternating a Phi step and a slope step.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::AuctionField;
use crate::identify::{slopes_given_phi, MarchOptions};
use crate::model::slope::bernstein_basis;
use crate::model::{Combiner, CombinerKind, Covariates, Monomial, SlopeFunction};
use crate::numerics::linspace;
use crate::numerics::lsq::{levenberg_marquardt, LmOptions};

/// First-stage output: U-hat and the opponent's G_jB_i-hat on the design.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UTable {
    pub bidder: usize,
    pub alpha: Vec<f64>,
    /// Quadrature weights in alpha (sum to 1).
    pub alpha_weights: Vec<f64>,
    pub zs: Vec<Covariates>,
    /// u[s][k] = U-hat(alpha_k | Z_s).
    pub u: Vec<Vec<f64>>,
    /// tau[s][k] = G_jB_i-hat(alpha_k | Z_s) for the opponent j.
    pub tau: Vec<Vec<f64>>,
}

/// Uniform design over a covariate box: `per_axis` points per coordinate, all bidders
/// and components varied jointly on a tensor grid.
pub fn design_grid(
    n: usize,
    dim: usize,
    lo: f64,
    hi: f64,
    per_axis: usize,
) -> Result<Vec<Covariates>> {
    if !(lo > 0.0 && hi >= lo) || per_axis == 0 {
        return Err(Error::invalid(
            "design box needs 0 < lo <= hi and at least one point per axis",
        ));
    }
    let axis = if per_axis == 1 {
        vec![0.5 * (lo + hi)]
    } else {
        linspace(lo, hi, per_axis)
    };
    let coords = n * dim;
    let total = per_axis.pow(coords as u32);
    let mut out = Vec::with_capacity(total);
    for mut code in 0..total {
        let mut vals = vec![0.0; coords];
        for v in vals.iter_mut().rev() {
            *v = axis[code % per_axis];
            code /= per_axis;
        }
        out.push(Covariates::new(n, dim, vals)?);
    }
    Ok(out)
}

/// Tabulate U-hat on `alpha_points` midpoints (k + 1/2)/m at every design point.
pub fn estimate_u_hat<F: AuctionField + ?Sized>(
    field: &F,
    alpha_points: usize,
    zs: &[Covariates],
) -> Result<UTable> {
    if field.n() != 2 {
        return Err(Error::Unsupported(
            "the sieve estimator is implemented for two bidders".into(),
        ));
    }
    if alpha_points == 0 || zs.is_empty() {
        return Err(Error::invalid("empty design"));
    }
    let i = field.bidder();
    let j = 1 - i;
    let m = alpha_points as f64;
    let alpha: Vec<f64> = (0..alpha_points).map(|k| (k as f64 + 0.5) / m).collect();
    let rows = zs
        .par_iter()
        .map(|z| {
            let u = alpha
                .iter()
                .map(|&a| field.u(a, z))
                .collect::<Result<Vec<_>>>()?;
            let t = alpha
                .iter()
                .map(|&a| field.gb(j, a, z))
                .collect::<Result<Vec<_>>>()?;
            Ok((u, t))
        })
        .collect::<Result<Vec<_>>>()?;
    let (u, tau) = rows.into_iter().unzip();
    Ok(UTable {
        bidder: i,
        alpha_weights: vec![1.0 / m; alpha_points],
        alpha,
        zs: zs.to_vec(),
        u,
        tau,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PhiSieve {
    /// Tensor-product monomials x_1^a x_2^b with a, b <= degree.
    Polynomial { degree: u32 },
    /// c + x_1 + x_2; only the intercept is free under the normalization.
    Additive,
    /// A fixed combiner; the Phi step is skipped.
    Fixed { combiner: Combiner },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlopeBackend {
    /// Constrained least squares in the slope coefficients.
    LeastSquares,
    /// Solve the two-bidder slope ODE with the current Phi, project onto the sieve,
    /// then polish by least squares. Needs the field.
    Ode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DropoutRule {
    /// Number of consecutive iterations the condition must hold.
    pub window: usize,
    /// Relative change of the slope coefficients between iterations counted as oscillation.
    pub oscillation_tol: f64,
    /// Contribution of x_j to Phi (RMS, relative to RMS of U-hat) counted as negligible.
    pub strength_tol: f64,
    /// Slope coefficients below this fraction of the largest slope count as collapsed;
    /// with the unit origin partial pinned, a negligible x_j shows up as gamma_j -> 0.
    pub collapse_tol: f64,
}

impl Default for DropoutRule {
    fn default() -> Self {
        Self {
            window: 3,
            oscillation_tol: 1e-3,
            strength_tol: 1e-3,
            collapse_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SieveSpec {
    pub phi: PhiSieve,
    /// Bernstein coefficients per slope component (K_gamma).
    pub slope_coefs: usize,
    pub backend: SlopeBackend,
    pub max_iter: usize,
    /// Stop when one iteration lowers the objective by less than this fraction.
    pub rel_tol: f64,
    /// Stop when the objective falls below this.
    pub abs_tol: f64,
    /// Allowed increase of the objective across a block update.
    pub slack: f64,
    /// Iteration cap of each slope step.
    pub inner_iter: usize,
    /// Take a joint step over all coefficients when an alternating iteration lowers the
    /// objective by less than this fraction (0 disables).
    pub joint_trigger: f64,
    pub dropout: DropoutRule,
    /// Alpha grid (points on [0, 1]) for the ODE backend.
    pub ode_points: usize,
    pub march: MarchOptions,
}

impl Default for SieveSpec {
    fn default() -> Self {
        Self {
            phi: PhiSieve::Polynomial { degree: 1 },
            slope_coefs: 2,
            backend: SlopeBackend::LeastSquares,
            max_iter: 500,
            rel_tol: 1e-8,
            abs_tol: 1e-28,
            slack: 1e-12,
            inner_iter: 100,
            joint_trigger: 1e-2,
            dropout: DropoutRule::default(),
            ode_points: 41,
            march: MarchOptions::default(),
        }
    }
}

impl SieveSpec {
    fn validate(&self) -> Result<()> {
        if self.slope_coefs == 0 {
            return Err(Error::invalid("slope sieve needs at least one coefficient"));
        }
        if let PhiSieve::Fixed { combiner } = &self.phi {
            if combiner.arity() != 2 {
                return Err(Error::invalid("fixed combiner must take two mixed signals"));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("iteration budget must be positive"));
        }
        Ok(())
    }
}

/// Current iterate. Slopes are stored as square roots of Bernstein increments, so any
/// real vector is a nondecreasing nonnegative slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SieveState {
    /// Coefficients of the free Phi terms (in `free_terms` order).
    pub theta: Vec<f64>,
    /// eta[j][d][l]; None for slopes dropped from (or never in) the fit.
    pub eta: Vec<Option<Vec<Vec<f64>>>>,
}

impl SieveState {
    pub fn active(&self) -> Vec<usize> {
        (0..self.eta.len())
            .filter(|&j| self.eta[j].is_some())
            .collect()
    }

    /// Bernstein coefficients beta = cumsum(eta^2).
    pub fn coefs(&self, j: usize) -> Option<Vec<Vec<f64>>> {
        self.eta[j]
            .as_ref()
            .map(|comp| comp.iter().map(|e| increments_to_coefs(e)).collect())
    }
}

fn increments_to_coefs(eta: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    eta.iter()
        .map(|e| {
            acc += e * e;
            acc
        })
        .collect()
}

fn coefs_to_increments(beta: &[f64]) -> Result<Vec<f64>> {
    let mut prev = 0.0;
    beta.iter()
        .map(|&b| {
            let d = b - prev;
            prev = b;
            if d < -1e-12 {
                Err(Error::invalid(
                    "initial slope coefficients must be nonnegative and nondecreasing",
                ))
            } else {
                Ok(d.max(0.0).sqrt())
            }
        })
        .collect()
}

/// Initial state from slopes (Bernstein, K_gamma coefficients each); None means the
/// default 0.5 -> 1 ramp.
pub fn initial_state(
    spec: &SieveSpec,
    dim: usize,
    slopes: &[Option<SlopeFunction>],
) -> Result<SieveState> {
    let k = spec.slope_coefs;
    let mut eta = Vec::with_capacity(2);
    for j in 0..2 {
        let comp = match slopes.get(j).and_then(|s| s.as_ref()) {
            Some(s) => {
                if s.dim() != dim || s.coefs().iter().any(|c| c.len() != k) {
                    return Err(Error::invalid(format!(
                        "initial slope {} must have {dim} components of {k} coefficients",
                        j + 1
                    )));
                }
                s.coefs()
                    .iter()
                    .map(|c| coefs_to_increments(c))
                    .collect::<Result<Vec<_>>>()?
            }
            None => {
                let ramp: Vec<f64> = (0..k)
                    .map(|l| {
                        if k == 1 {
                            0.75
                        } else {
                            0.5 + 0.5 * l as f64 / (k - 1) as f64
                        }
                    })
                    .collect();
                vec![coefs_to_increments(&ramp)?; dim]
            }
        };
        eta.push(Some(comp));
    }
    let theta = vec![0.0; free_terms(&spec.phi, &[0, 1]).len()];
    Ok(SieveState { theta, eta })
}

/// Powers of the free Phi terms given the active coordinates.
pub fn free_terms(phi: &PhiSieve, active: &[usize]) -> Vec<Vec<u32>> {
    match phi {
        PhiSieve::Fixed { .. } => Vec::new(),
        PhiSieve::Additive => vec![vec![0, 0]],
        PhiSieve::Polynomial { degree } => {
            let mut out = Vec::new();
            for a in 0..=*degree {
                for b in 0..=*degree {
                    let p = vec![a, b];
                    if (a > 0 && !active.contains(&0)) || (b > 0 && !active.contains(&1)) {
                        continue;
                    }
                    if (a == 1 && b == 0) || (a == 0 && b == 1) {
                        continue;
                    }
                    out.push(p);
                }
            }
            out
        }
    }
}

/// Phi for the current coefficients: pinned unit linear terms for active coordinates plus
/// the free terms.
pub fn combiner_for(phi: &PhiSieve, active: &[usize], theta: &[f64]) -> Result<Combiner> {
    if let PhiSieve::Fixed { combiner } = phi {
        return Ok(combiner.clone());
    }
    let mut terms: Vec<Monomial> = active
        .iter()
        .map(|&j| {
            let mut p = vec![0, 0];
            p[j] = 1;
            Monomial {
                coef: 1.0,
                powers: p,
            }
        })
        .collect();
    for (p, c) in free_terms(phi, active).into_iter().zip(theta) {
        terms.push(Monomial {
            coef: *c,
            powers: p,
        });
    }
    Combiner::new(CombinerKind::Polynomial { n: 2, terms })
}

fn monomial(p: &[u32], x: &[f64]) -> f64 {
    p.iter().zip(x).map(|(e, v)| v.powi(*e as i32)).product()
}

struct Point {
    sw: f64,
    u: f64,
    z: [Vec<f64>; 2],
    basis: [Vec<f64>; 2],
    /// Tail sums sum_{k >= l} b_k, used by the increment parameterisation.
    tails: [Vec<f64>; 2],
}

struct Problem<'a> {
    spec: &'a SieveSpec,
    points: Vec<Point>,
    dim: usize,
    u_scale: f64,
}

impl<'a> Problem<'a> {
    fn new(table: &UTable, spec: &'a SieveSpec) -> Result<Self> {
        let i = table.bidder;
        let j = 1 - i;
        let deg = spec.slope_coefs - 1;
        let dim = table.zs[0].dim();
        let ns = table.zs.len() as f64;
        let mut points = Vec::with_capacity(table.zs.len() * table.alpha.len());
        for (s, z) in table.zs.iter().enumerate() {
            if z.n() != 2 || z.dim() != dim {
                return Err(Error::invalid(
                    "design points must share the two-bidder shape",
                ));
            }
            for (k, &a) in table.alpha.iter().enumerate() {
                let mut t = [0.0; 2];
                t[i] = a;
                t[j] = table.tau[s][k].clamp(0.0, 1.0);
                let basis = [bernstein_basis(deg, t[0]), bernstein_basis(deg, t[1])];
                let tails = [tail_sums(&basis[0]), tail_sums(&basis[1])];
                points.push(Point {
                    sw: (table.alpha_weights[k] / ns).sqrt(),
                    u: table.u[s][k],
                    z: [z.bidder(0).to_vec(), z.bidder(1).to_vec()],
                    basis,
                    tails,
                });
            }
        }
        let u_scale = points
            .iter()
            .map(|p| (p.sw * p.u).powi(2))
            .sum::<f64>()
            .sqrt()
            .max(1e-300);
        Ok(Self {
            spec,
            points,
            dim,
            u_scale,
        })
    }

    fn mixed(&self, p: &Point, coefs: &[Option<Vec<Vec<f64>>>]) -> [f64; 2] {
        let mut x = [0.0; 2];
        for j in 0..2 {
            if let Some(c) = &coefs[j] {
                x[j] = (0..self.dim)
                    .map(|d| {
                        p.z[j][d]
                            * c[d]
                                .iter()
                                .zip(&p.basis[j])
                                .map(|(a, b)| a * b)
                                .sum::<f64>()
                    })
                    .sum();
            }
        }
        x
    }

    fn all_coefs(state: &SieveState) -> Vec<Option<Vec<Vec<f64>>>> {
        (0..2).map(|j| state.coefs(j)).collect()
    }

    fn objective(&self, state: &SieveState) -> Result<f64> {
        let phi = combiner_for(&self.spec.phi, &state.active(), &state.theta)?;
        let coefs = Self::all_coefs(state);
        Ok(self
            .points
            .par_iter()
            .map(|p| {
                let x = self.mixed(p, &coefs);
                (p.sw * (p.u - phi.eval(&x))).powi(2)
            })
            .sum())
    }

    /// Exact least squares over the free Phi coefficients.
    fn phi_step(&self, state: &mut SieveState) -> Result<()> {
        let active = state.active();
        let free = free_terms(&self.spec.phi, &active);
        if free.is_empty() {
            state.theta.clear();
            return Ok(());
        }
        let pinned = combiner_for(&self.spec.phi, &active, &vec![0.0; free.len()])?;
        let coefs = Self::all_coefs(state);
        let m = self.points.len();
        let mut a = DMatrix::zeros(m, free.len());
        let mut b = DVector::zeros(m);
        for (r, p) in self.points.iter().enumerate() {
            let x = self.mixed(p, &coefs);
            for (c, pw) in free.iter().enumerate() {
                a[(r, c)] = p.sw * monomial(pw, &x);
            }
            b[r] = p.sw * (p.u - pinned.eval(&x));
        }
        let sol = a
            .svd(true, true)
            .solve(&b, 1e-13)
            .map_err(|e| Error::numerical(format!("Phi step: {e}"), None))?;
        state.theta = sol.iter().cloned().collect();
        Ok(())
    }

    fn unpack(&self, state: &SieveState, v: &[f64]) -> SieveState {
        let k = self.spec.slope_coefs;
        let mut out = state.clone();
        let mut pos = 0;
        for comp in out.eta.iter_mut().flatten() {
            for e in comp.iter_mut() {
                e.copy_from_slice(&v[pos..pos + k]);
                pos += k;
            }
        }
        out
    }

    fn pack(state: &SieveState) -> Vec<f64> {
        state
            .eta
            .iter()
            .flatten()
            .flatten()
            .flatten()
            .cloned()
            .collect()
    }

    /// Residuals and Jacobian in the slope parameters for fixed Phi.
    fn slope_system(&self, phi: &Combiner, state: &SieveState) -> (DVector<f64>, DMatrix<f64>) {
        let k = self.spec.slope_coefs;
        let coefs = Self::all_coefs(state);
        let active = state.active();
        let np = active.len() * self.dim * k;
        let rows: Vec<(f64, Vec<f64>)> = self
            .points
            .par_iter()
            .map(|p| {
                let x = self.mixed(p, &coefs);
                let grad = phi.gradient(&x);
                let mut row = vec![0.0; np];
                let mut col = 0;
                for &j in &active {
                    let eta = state.eta[j].as_ref().unwrap();
                    for d in 0..self.dim {
                        for l in 0..k {
                            row[col] =
                                -p.sw * grad[j] * p.z[j][d] * 2.0 * eta[d][l] * p.tails[j][l];
                            col += 1;
                        }
                    }
                }
                (p.sw * (p.u - phi.eval(&x)), row)
            })
            .collect();
        let r = DVector::from_iterator(rows.len(), rows.iter().map(|(v, _)| *v));
        let j = DMatrix::from_fn(rows.len(), np, |a, b| rows[a].1[b]);
        (r, j)
    }

    /// Residuals and Jacobian in (theta, slope parameters) jointly.
    fn joint_system(&self, state: &SieveState) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let active = state.active();
        let phi = combiner_for(&self.spec.phi, &active, &state.theta)?;
        let free = free_terms(&self.spec.phi, &active);
        let coefs = Self::all_coefs(state);
        let (r, js) = self.slope_system(&phi, state);
        let nt = free.len();
        let mut jac = DMatrix::zeros(r.len(), nt + js.ncols());
        for (row, p) in self.points.iter().enumerate() {
            let x = self.mixed(p, &coefs);
            for (c, pw) in free.iter().enumerate() {
                jac[(row, c)] = -p.sw * monomial(pw, &x);
            }
        }
        jac.view_mut((0, nt), (r.len(), js.ncols())).copy_from(&js);
        Ok((r, jac))
    }

    /// Levenberg-Marquardt on all coefficients at once; never raises the objective.
    fn joint_step(&self, state: &SieveState) -> Result<SieveState> {
        let nt = state.theta.len();
        let with = |v: &[f64]| {
            let mut s = self.unpack(state, &v[nt..]);
            s.theta = v[..nt].to_vec();
            s
        };
        let mut x0 = state.theta.clone();
        x0.extend(Self::pack(state));
        let lm = LmOptions {
            max_iter: self.spec.inner_iter,
            ..LmOptions::default()
        };
        let out = levenberg_marquardt(|v| self.joint_system(&with(v)), &x0, &lm)?;
        Ok(with(&out.x))
    }

    fn slope_step_ls(&self, state: &SieveState) -> Result<SieveState> {
        let phi = combiner_for(&self.spec.phi, &state.active(), &state.theta)?;
        let lm = LmOptions {
            max_iter: self.spec.inner_iter,
            ..LmOptions::default()
        };
        let out = levenberg_marquardt(
            |v| Ok(self.slope_system(&phi, &self.unpack(state, v))),
            &Self::pack(state),
            &lm,
        )?;
        Ok(self.unpack(state, &out.x))
    }

    /// Project slope paths sampled on `grid` onto the sieve.
    fn project(
        &self,
        state: &SieveState,
        paths: &[Option<Vec<Vec<f64>>>],
        grid: &[f64],
    ) -> Result<SieveState> {
        let k = self.spec.slope_coefs;
        let basis: Vec<Vec<f64>> = grid.iter().map(|&t| bernstein_basis(k - 1, t)).collect();
        let tails: Vec<Vec<f64>> = basis.iter().map(|b| tail_sums(b)).collect();
        let mut out = state.clone();
        for j in state.active() {
            let path = paths[j]
                .as_ref()
                .ok_or_else(|| Error::numerical("missing ODE slope path", None))?;
            let comps = out.eta[j].as_mut().unwrap();
            for d in 0..self.dim {
                let target: Vec<f64> = path.iter().map(|v| v[d]).collect();
                let fit = levenberg_marquardt(
                    |e| {
                        let beta = increments_to_coefs(e);
                        let r = DVector::from_iterator(
                            grid.len(),
                            (0..grid.len()).map(|g| {
                                beta.iter().zip(&basis[g]).map(|(a, b)| a * b).sum::<f64>()
                                    - target[g]
                            }),
                        );
                        let jac = DMatrix::from_fn(grid.len(), k, |g, l| 2.0 * e[l] * tails[g][l]);
                        Ok((r, jac))
                    },
                    &comps[d],
                    &LmOptions::default(),
                )?;
                comps[d] = fit.x;
            }
        }
        Ok(out)
    }

    /// RMS contribution of x_j to Phi over the design, relative to the RMS of U-hat.
    fn strength(&self, state: &SieveState, j: usize) -> Result<f64> {
        let phi = combiner_for(&self.spec.phi, &state.active(), &state.theta)?;
        let coefs = Self::all_coefs(state);
        let s: f64 = self
            .points
            .iter()
            .map(|p| {
                let x = self.mixed(p, &coefs);
                let mut y = x;
                y[j] = 0.0;
                (p.sw * (phi.eval(&x) - phi.eval(&y))).powi(2)
            })
            .sum();
        Ok(s.sqrt() / self.u_scale)
    }
}

fn tail_sums(b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; b.len()];
    let mut acc = 0.0;
    for l in (0..b.len()).rev() {
        acc += b[l];
        out[l] = acc;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropEvent {
    /// 0-based bidder whose slope left the fit.
    pub bidder: usize,
    pub iteration: usize,
    pub strength: f64,
    pub oscillation: f64,
}

/// Per-iteration record the drop-out rule inspects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeRecord {
    /// Bernstein coefficients (flattened over components); None after a drop.
    pub coefs: Vec<Option<Vec<f64>>>,
    pub strength: Vec<Option<f64>>,
}

/// Slope j is dropped when, over the last `window` iterations, its contribution to Phi
/// stays below `strength_tol` while its coefficients either keep moving by more than
/// `oscillation_tol` (relative) or have collapsed towards zero. Returns
/// (bidder, strength, oscillation) for the first such slope.
pub fn dropout_monitor(history: &[SlopeRecord], rule: &DropoutRule) -> Option<(usize, f64, f64)> {
    let w = rule.window.max(1);
    if history.len() < w + 1 || history.len() < 3 {
        return None;
    }
    let recent = &history[history.len() - w - 1..];
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let last = recent.last().unwrap();
    let largest = last
        .coefs
        .iter()
        .flatten()
        .map(|c| norm(c))
        .fold(0.0, f64::max);
    let n = recent[0].coefs.len();
    'bidders: for j in 0..n {
        let mut worst_strength = 0.0f64;
        let mut least_move = f64::INFINITY;
        for pair in recent.windows(2) {
            let (Some(a), Some(b)) = (&pair[0].coefs[j], &pair[1].coefs[j]) else {
                continue 'bidders;
            };
            let Some(s) = pair[1].strength[j] else {
                continue 'bidders;
            };
            let diff = a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt();
            worst_strength = worst_strength.max(s);
            least_move = least_move.min(diff / norm(b).max(1e-300));
        }
        let collapsed = last.coefs[j]
            .as_ref()
            .is_some_and(|c| norm(c) <= rule.collapse_tol * largest);
        if worst_strength < rule.strength_tol && (least_move > rule.oscillation_tol || collapsed) {
            return Some((j, worst_strength, least_move));
        }
    }
    None
}

/// At a stalled iterate: a negligible slope that has collapsed towards zero.
fn collapsed_slope(record: &SlopeRecord, rule: &DropoutRule) -> Option<(usize, f64, f64)> {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let largest = record
        .coefs
        .iter()
        .flatten()
        .map(|c| norm(c))
        .fold(0.0, f64::max);
    (0..record.coefs.len()).find_map(|j| match (&record.coefs[j], record.strength[j]) {
        (Some(c), Some(s)) if s < rule.strength_tol && norm(c) <= rule.collapse_tol * largest => {
            Some((j, s, 0.0))
        }
        _ => None,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub phi: Combiner,
    /// Fitted slopes; None for dropped slopes.
    pub slopes: Vec<Option<SlopeFunction>>,
    pub state: SieveState,
    /// objective[0] is the starting value; one entry per iteration after that, plus the
    /// refitted value after each drop.
    pub objective: Vec<f64>,
    /// Indices into `objective` where a segment starts (0 and after every drop).
    pub segment_starts: Vec<usize>,
    pub drops: Vec<DropEvent>,
    /// Iterations at which the ODE backend fell back to least squares, with the reason.
    pub fallbacks: Vec<(usize, String)>,
    pub converged: bool,
    pub iterations: usize,
}

impl FitResult {
    pub fn final_objective(&self) -> f64 {
        *self.objective.last().unwrap()
    }

    /// Largest increase between consecutive objective values within a segment.
    pub fn max_increase(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for k in 1..self.objective.len() {
            if !self.segment_starts.contains(&k) {
                worst = worst.max(self.objective[k] - self.objective[k - 1]);
            }
        }
        worst
    }
}

/// One Phi step followed by one slope step. Fails if either block raises the objective.
pub fn alternate_minimize<F: AuctionField + ?Sized>(
    state: &SieveState,
    table: &UTable,
    spec: &SieveSpec,
    field: Option<&F>,
) -> Result<(SieveState, f64, Option<String>)> {
    spec.validate()?;
    let prob = Problem::new(table, spec)?;
    let before = prob.objective(state)?;
    step(&prob, state, before, field, &table.zs)
}

fn step<F: AuctionField + ?Sized>(
    prob: &Problem,
    state: &SieveState,
    before: f64,
    field: Option<&F>,
    zs: &[Covariates],
) -> Result<(SieveState, f64, Option<String>)> {
    let spec = prob.spec;
    let mut next = state.clone();
    prob.phi_step(&mut next)?;
    let after_phi = prob.objective(&next)?;
    if after_phi > before + spec.slack {
        return Err(Error::numerical(
            format!("Phi step raised the objective from {before:e} to {after_phi:e}"),
            Some(after_phi - before),
        ));
    }
    let mut fallback = None;
    let slopes = match (spec.backend, field) {
        (SlopeBackend::LeastSquares, _) => prob.slope_step_ls(&next)?,
        (SlopeBackend::Ode, None) => {
            return Err(Error::invalid(
                "the ODE slope backend needs the auction field",
            ))
        }
        (SlopeBackend::Ode, Some(f)) => {
            let via_ode = || -> Result<SieveState> {
                let phi = combiner_for(&spec.phi, &next.active(), &next.theta)?;
                if next.active().len() < 2 {
                    return Err(Error::Unsupported("ODE backend needs both slopes".into()));
                }
                let terminal: Vec<Vec<f64>> = (0..2)
                    .map(|j| {
                        next.coefs(j)
                            .unwrap()
                            .iter()
                            .map(|c| *c.last().unwrap())
                            .collect()
                    })
                    .collect();
                let grid = linspace(0.0, 1.0, spec.ode_points.max(2));
                let paths = slopes_given_phi(f, &phi, &terminal, zs, &grid, &spec.march)?;
                let start = prob.project(&next, &paths, &grid)?;
                prob.slope_step_ls(&start)
            };
            match via_ode() {
                Ok(s) if prob.objective(&s)? <= after_phi + spec.slack => s,
                Ok(s) => {
                    fallback = Some(format!(
                        "ODE start ended at {:e} above {after_phi:e}",
                        prob.objective(&s)?
                    ));
                    prob.slope_step_ls(&next)?
                }
                Err(e) => {
                    fallback = Some(e.to_string());
                    prob.slope_step_ls(&next)?
                }
            }
        }
    };
    let after = prob.objective(&slopes)?;
    if after > after_phi + spec.slack {
        return Err(Error::numerical(
            format!("slope step raised the objective from {after_phi:e} to {after:e}"),
            Some(after - after_phi),
        ));
    }
    Ok((slopes, after, fallback))
}

/// Alternate Phi and slope steps until the objective stalls, applying the drop-out rule.
pub fn fit<F: AuctionField + ?Sized>(
    table: &UTable,
    spec: &SieveSpec,
    init: SieveState,
    field: Option<&F>,
) -> Result<FitResult> {
    spec.validate()?;
    let prob = Problem::new(table, spec)?;
    if init.eta.len() != 2 {
        return Err(Error::invalid("sieve state must carry two slope entries"));
    }
    let mut state = init;
    let expected = free_terms(&spec.phi, &state.active()).len();
    state.theta.resize(expected, 0.0);
    let mut objective = vec![prob.objective(&state)?];
    let mut history: Vec<SlopeRecord> = Vec::new();
    let mut drops = Vec::new();
    let mut segment_starts = vec![0];
    let mut fallbacks = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < spec.max_iter {
        iterations += 1;
        let before = *objective.last().unwrap();
        let (mut next, mut after, fb) = step(&prob, &state, before, field, &table.zs)?;
        if let Some(msg) = fb {
            fallbacks.push((iterations, msg));
        }
        if spec.joint_trigger > 0.0
            && after > spec.abs_tol
            && before - after < spec.joint_trigger * before
        {
            let joint = prob.joint_step(&next)?;
            let value = prob.objective(&joint)?;
            if value <= after {
                next = joint;
                after = value;
            }
        }
        state = next;
        objective.push(after);

        let record = SlopeRecord {
            coefs: (0..2).map(|j| state.coefs(j).map(|c| c.concat())).collect(),
            strength: (0..2)
                .map(|j| {
                    if state.eta[j].is_some() {
                        prob.strength(&state, j).map(Some)
                    } else {
                        Ok(None)
                    }
                })
                .collect::<Result<Vec<_>>>()?,
        };
        history.push(record);
        let stalled = after <= spec.abs_tol || before - after <= spec.rel_tol * before;
        if state.active().len() > 1 && !matches!(spec.phi, PhiSieve::Fixed { .. }) {
            let decision = dropout_monitor(&history, &spec.dropout).or_else(|| {
                if stalled {
                    collapsed_slope(history.last().unwrap(), &spec.dropout)
                } else {
                    None
                }
            });
            if let Some((j, strength, oscillation)) = decision {
                state.eta[j] = None;
                state.theta = vec![0.0; free_terms(&spec.phi, &state.active()).len()];
                prob.phi_step(&mut state)?;
                drops.push(DropEvent {
                    bidder: j,
                    iteration: iterations,
                    strength,
                    oscillation,
                });
                history.clear();
                // The model changed; the objective sequence restarts from the refitted value.
                segment_starts.push(objective.len());
                objective.push(prob.objective(&state)?);
                continue;
            }
        }
        if stalled {
            converged = true;
            break;
        }
    }
    let phi = combiner_for(&spec.phi, &state.active(), &state.theta)?;
    let slopes = (0..2)
        .map(|j| state.coefs(j).map(SlopeFunction::bernstein).transpose())
        .collect::<Result<Vec<_>>>()?;
    Ok(FitResult {
        phi,
        slopes,
        state,
        objective,
        segment_starts,
        drops,
        fallbacks,
        converged,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::OracleField;
    use crate::model::{examples, SignalCopula};
    use crate::strategy::{BaseSpec, StrategyProfile};

    fn oracle(phi: Combiner, slopes: Vec<SlopeFunction>) -> OracleField {
        let m = examples::from_first_bidder(phi, slopes, SignalCopula::independence(2)).unwrap();
        let p = StrategyProfile::canonical(2, BaseSpec::Linear { lo: 0.1, hi: 0.9 }).unwrap();
        OracleField::from_model(m, p, 0).unwrap()
    }

    fn table(f: &OracleField) -> UTable {
        estimate_u_hat(f, 41, &design_grid(2, 1, 1.0, 2.0, 3).unwrap()).unwrap()
    }

    #[test]
    fn in_sieve_generator_is_fitted_exactly() {
        let f = oracle(
            Combiner::bilinear_interaction(),
            vec![
                SlopeFunction::linear(0.5, 1.0),
                SlopeFunction::linear(0.4, 1.0),
            ],
        );
        let t = table(&f);
        let spec = SieveSpec::default();
        let init = initial_state(&spec, 1, &[None, None]).unwrap();
        let out = fit::<OracleField>(&t, &spec, init, None).unwrap();
        assert!(out.max_increase() <= 1e-12);
        assert!(out.final_objective() <= 1e-10);
        assert!(out.drops.is_empty());
    }

    #[test]
    fn private_value_slope_is_dropped() {
        let f = oracle(
            Combiner::additive(vec![1.0, 0.0]),
            vec![
                SlopeFunction::linear(0.5, 1.0),
                SlopeFunction::linear(0.4, 1.0),
            ],
        );
        let t = table(&f);
        let spec = SieveSpec::default();
        let init = initial_state(&spec, 1, &[None, None]).unwrap();
        let out = fit::<OracleField>(&t, &spec, init, None).unwrap();
        assert_eq!(out.drops.len(), 1);
        assert_eq!(out.drops[0].bidder, 1);
    }

    fn canonical() -> OracleField {
        oracle(
            Combiner::bilinear_interaction(),
            vec![
                SlopeFunction::linear(0.5, 1.0),
                SlopeFunction::linear(0.4, 1.0),
            ],
        )
    }

    #[test]
    fn start_at_truth_stays_put() {
        let f = canonical();
        let t = table(&f);
        let spec = SieveSpec::default();
        let truth = [
            Some(SlopeFunction::linear(0.5, 1.0)),
            Some(SlopeFunction::linear(0.4, 1.0)),
        ];
        let init = initial_state(&spec, 1, &truth).unwrap();
        let out = fit::<OracleField>(&t, &spec, init, None).unwrap();
        assert_eq!(out.iterations, 1);
        for j in 0..2 {
            let (a, b) = (
                out.slopes[j].as_ref().unwrap().coefs(),
                truth[j].as_ref().unwrap().coefs(),
            );
            for (x, y) in a[0].iter().zip(&b[0]) {
                assert!((x - y).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn phi_step_residual_is_orthogonal_to_the_design() {
        let f = canonical();
        let t = table(&f);
        let spec = SieveSpec {
            phi: PhiSieve::Polynomial { degree: 2 },
            ..SieveSpec::default()
        };
        let prob = Problem::new(&t, &spec).unwrap();
        let mut state = initial_state(&spec, 1, &[None, None]).unwrap();
        prob.phi_step(&mut state).unwrap();
        let phi = combiner_for(&spec.phi, &[0, 1], &state.theta).unwrap();
        let coefs = Problem::all_coefs(&state);
        let free = free_terms(&spec.phi, &[0, 1]);
        let mut dots = vec![0.0; free.len()];
        for p in &prob.points {
            let x = prob.mixed(p, &coefs);
            let r = p.sw * (p.u - phi.eval(&x));
            for (c, pw) in free.iter().enumerate() {
                dots[c] += r * p.sw * monomial(pw, &x);
            }
        }
        assert!(dots.iter().all(|d| d.abs() <= 1e-10), "{dots:?}");
    }

    #[test]
    fn out_of_sieve_floor_falls_with_sieve_size() {
        let f = oracle(
            Combiner::additive(vec![1.0, 1.0]),
            vec![
                SlopeFunction::scalar(vec![0.5, 0.5, 1.0]).unwrap(),
                SlopeFunction::scalar(vec![0.4, 0.4, 1.0]).unwrap(),
            ],
        );
        let t = table(&f);
        let floors: Vec<f64> = [2usize, 4]
            .iter()
            .map(|&k| {
                let spec = SieveSpec {
                    phi: PhiSieve::Additive,
                    slope_coefs: k,
                    ..SieveSpec::default()
                };
                let init = initial_state(&spec, 1, &[None, None]).unwrap();
                fit::<OracleField>(&t, &spec, init, None)
                    .unwrap()
                    .final_objective()
            })
            .collect();
        assert!(floors[0] > 1e-8, "{floors:?}");
        assert!(floors[1] < floors[0]);
    }

    #[test]
    fn ode_backend_agrees_with_least_squares() {
        let f = canonical();
        let t = estimate_u_hat(&f, 41, &design_grid(2, 1, 1.0, 2.0, 2).unwrap()).unwrap();
        let ls = SieveSpec::default();
        let ode = SieveSpec {
            backend: SlopeBackend::Ode,
            ..SieveSpec::default()
        };
        let a = fit::<OracleField>(&t, &ls, initial_state(&ls, 1, &[None, None]).unwrap(), None)
            .unwrap();
        let b = fit(
            &t,
            &ode,
            initial_state(&ode, 1, &[None, None]).unwrap(),
            Some(&f),
        )
        .unwrap();
        assert!(b.max_increase() <= 1e-12);
        assert!(b.fallbacks.len() < b.iterations, "{:?}", b.fallbacks);
        for j in 0..2 {
            let (sa, sb) = (a.slopes[j].as_ref().unwrap(), b.slopes[j].as_ref().unwrap());
            for k in 0..=20 {
                let x = k as f64 / 20.0;
                assert!((sa.component(0, x) - sb.component(0, x)).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn estimator_matches_identification() {
        let f = canonical();
        let t = table(&f);
        let spec = SieveSpec::default();
        let est = fit::<OracleField>(
            &t,
            &spec,
            initial_state(&spec, 1, &[None, None]).unwrap(),
            None,
        )
        .unwrap();
        let opts = crate::identify::IdentifyOptions {
            overid_points: Some(vec![]),
            ..Default::default()
        };
        let id = crate::identify::identify(&f, &opts).unwrap();
        for j in 0..2 {
            let s = est.slopes[j].as_ref().unwrap();
            for (k, &a) in id.alpha.iter().enumerate() {
                assert!((s.component(0, a) - id.slopes[j].as_ref().unwrap()[k][0]).abs() < 1e-3);
            }
        }
        for x in id.phi.nodes().iter().step_by(7) {
            let mut full = vec![0.0; 2];
            full[0] = x[0];
            full[1] = x[1];
            let v = crate::identify::PhiFn::eval(&id.phi, &full).unwrap();
            assert!((est.phi.eval(&full) - v).abs() < 1e-3);
        }
    }

    #[test]
    fn stable_slopes_are_not_dropped() {
        let rec = |c: f64| SlopeRecord {
            coefs: vec![Some(vec![0.5, 1.0]), Some(vec![0.4, c])],
            strength: vec![Some(0.5), Some(0.4)],
        };
        let history: Vec<SlopeRecord> = (0..5).map(|k| rec(1.0 + 1e-5 * (k % 2) as f64)).collect();
        assert!(dropout_monitor(&history, &DropoutRule::default()).is_none());
        let weak = |c: f64| SlopeRecord {
            coefs: vec![Some(vec![0.5, 1.0]), Some(vec![0.4, c])],
            strength: vec![Some(0.5), Some(1e-5)],
        };
        let noisy: Vec<SlopeRecord> = (0..5).map(|k| weak(1.0 + 1e-5 * (k % 2) as f64)).collect();
        assert!(dropout_monitor(&noisy, &DropoutRule::default()).is_none());
        let wild: Vec<SlopeRecord> = (0..5).map(|k| weak(1.0 + 0.5 * (k % 2) as f64)).collect();
        assert_eq!(
            dropout_monitor(&wild, &DropoutRule::default()).unwrap().0,
            1
        );
    }
}
