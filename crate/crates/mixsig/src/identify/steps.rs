//! Active set, endpoint slopes and the combiner, all read off U at one end of [0, 1].

use serde::{Deserialize, Serialize};

use super::phi::{u_limit, FieldPhi, PhiTable};
use crate::error::{Error, Result};
use crate::field::{zgrad, AuctionField};
use crate::model::Covariates;
use crate::numerics::diff::extrapolate_to_zero;

/// Which end of [0, 1] anchors identification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// alpha* = 1, common upper bid (two-bidder theorem).
    Terminal,
    /// alpha* = 0, common lower bid (three-bidder theorem).
    Initial,
}

impl Route {
    pub fn alpha_star(self) -> f64 {
        match self {
            Route::Terminal => 1.0,
            Route::Initial => 0.0,
        }
    }
}

fn u_gradient<F: AuctionField + ?Sized>(field: &F, alpha: f64, z: &Covariates) -> Result<Vec<f64>> {
    if alpha > 0.0 && alpha < 1.0 {
        return field.u_zgrad(alpha, z);
    }
    zgrad(|zz| u_limit(field, alpha, zz), z)
}

/// Per-bidder gradient norms of U(alpha* | Z), maximised over the grid.
pub fn active_gradients<F: AuctionField + ?Sized>(
    field: &F,
    route: Route,
    zs: &[Covariates],
) -> Result<Vec<f64>> {
    let n = field.n();
    let dim = field.dim();
    let mut best = vec![0.0f64; n];
    for z in zs {
        let g = u_gradient(field, route.alpha_star(), z)?;
        for j in 0..n {
            let norm = g[j * dim..(j + 1) * dim]
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            best[j] = best[j].max(norm);
        }
    }
    Ok(best)
}

/// j is active when the Z_j-gradient of U(alpha* | Z) exceeds `tolerance` somewhere on the grid.
pub fn detect_active_set<F: AuctionField + ?Sized>(
    field: &F,
    route: Route,
    zs: &[Covariates],
    tolerance: f64,
) -> Result<Vec<usize>> {
    let g = active_gradients(field, route, zs)?;
    let active: Vec<usize> = (0..g.len()).filter(|&j| g[j] > tolerance).collect();
    if active.is_empty() {
        return Err(Error::diagnostic(format!(
            "U does not respond to any covariate at alpha = {} (gradient norms {g:?})",
            route.alpha_star()
        )));
    }
    Ok(active)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitSchedule {
    /// Largest multiplier of the base covariate point.
    pub start: f64,
    /// Number of halvings.
    pub levels: usize,
    /// Allowed gap between the last two extrapolants (relative to 1 + |value|).
    pub tolerance: f64,
}

impl Default for LimitSchedule {
    fn default() -> Self {
        Self {
            start: 0.2,
            levels: 5,
            tolerance: 1e-6,
        }
    }
}

/// gamma_j(alpha*) = lim_{Z -> 0} dU(alpha* | Z)/dZ_j under the normalization
/// dPhi/dx_j(0) = 1, by polynomial extrapolation along Z = s * base.
pub fn recover_endpoint_slopes<F: AuctionField + ?Sized>(
    field: &F,
    route: Route,
    active: &[usize],
    base: &Covariates,
    schedule: &LimitSchedule,
) -> Result<Vec<Vec<f64>>> {
    let n = field.n();
    let dim = field.dim();
    let alpha = route.alpha_star();
    let mut out = vec![vec![0.0; dim]; n];
    let mut cache: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut grad_at = |s: f64| -> Result<Vec<f64>> {
        if let Some((_, g)) = cache.iter().find(|(t, _)| *t == s) {
            return Ok(g.clone());
        }
        let g = u_gradient(field, alpha, &base.scale_all(s))?;
        cache.push((s, g.clone()));
        Ok(g)
    };
    for &j in active {
        for d in 0..dim {
            let mut err = None;
            let res = extrapolate_to_zero(
                |s| match grad_at(s) {
                    Ok(g) => g[j * dim + d],
                    Err(e) => {
                        err = Some(e);
                        f64::NAN
                    }
                },
                schedule.start,
                schedule.levels,
                schedule.tolerance,
            );
            if let Some(e) = err {
                return Err(e);
            }
            out[j][d] = res
                .map_err(|e| {
                    Error::numerical(format!("endpoint slope of bidder {}: {e}", j + 1), None)
                })?
                .0;
        }
    }
    Ok(out)
}

/// Phi-hat through the field, for evaluation at arbitrary points.
pub fn field_phi<'a, F: AuctionField + ?Sized>(
    field: &'a F,
    route: Route,
    active: &[usize],
    slopes: &[Vec<f64>],
) -> FieldPhi<'a, F> {
    FieldPhi {
        field,
        alpha_star: route.alpha_star(),
        slopes: slopes.to_vec(),
        active: active.to_vec(),
        fill: 1.0,
    }
}

/// Tabulate Phi-hat on the grid spanned by `axes` (one axis per active coordinate).
pub fn recover_phi<F: AuctionField + ?Sized>(
    field: &F,
    route: Route,
    active: &[usize],
    slopes: &[Vec<f64>],
    axes: Vec<Vec<f64>>,
) -> Result<PhiTable> {
    for &j in active {
        if slopes[j].iter().all(|v| *v == 0.0) {
            return Err(Error::diagnostic(format!(
                "endpoint slope of active bidder {} is zero",
                j + 1
            )));
        }
    }
    PhiTable::build(&field_phi(field, route, active, slopes), active, axes)
}
