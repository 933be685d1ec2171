//! Representations of the recovered combiner Phi-hat.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::AuctionField;
use crate::model::{Combiner, Covariates};
use crate::numerics::diff::{central5, neville_to_zero};
use crate::numerics::interp::bracket;

/// A combiner that identification can evaluate. Inputs are full n-vectors of mixed signals.
pub trait PhiFn: Sync {
    fn n(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Result<f64>;

    fn partial(&self, j: usize, x: &[f64]) -> Result<f64> {
        let h = 1e-4 * x[j].abs().max(1e-2);
        let mut err = None;
        let mut y = x.to_vec();
        let d = central5(
            |v| {
                y[j] = v;
                self.eval(&y).unwrap_or_else(|e| {
                    err = Some(e);
                    f64::NAN
                })
            },
            x[j],
            h.min(0.5 * x[j].abs()).max(1e-7),
        );
        match err {
            Some(e) => Err(e),
            None => Ok(d),
        }
    }
}

impl PhiFn for Combiner {
    fn n(&self) -> usize {
        self.arity()
    }

    fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(Combiner::eval(self, x))
    }

    fn partial(&self, j: usize, x: &[f64]) -> Result<f64> {
        Ok(Combiner::partial(self, j, x))
    }
}

/// Frontier value at an endpoint, extrapolated from inside when the field cannot
/// evaluate it there (0/0 ratios at alpha = 0 for three bidders).
pub fn u_limit<F: AuctionField + ?Sized>(field: &F, alpha: f64, z: &Covariates) -> Result<f64> {
    let at_edge = alpha <= 0.0 || alpha >= 1.0;
    match field.u(alpha, z) {
        Ok(v) if v.is_finite() => return Ok(v),
        Err(e) if !at_edge => return Err(e),
        _ => {}
    }
    let hs = [0.02, 0.01, 0.005, 0.0025];
    let vals = hs
        .iter()
        .map(|&h| field.u(if alpha <= 0.0 { h } else { 1.0 - h }, z))
        .collect::<Result<Vec<_>>>()?;
    Ok(*neville_to_zero(&hs, &vals).last().unwrap())
}

/// Phi-hat(x) = U(alpha* | Z) with Z_j solving Z_j' gamma_j(alpha*) = x_j.
pub struct FieldPhi<'a, F: AuctionField + ?Sized> {
    pub field: &'a F,
    pub alpha_star: f64,
    /// gamma_j(alpha*) per bidder (D-vector); ignored for inactive bidders.
    pub slopes: Vec<Vec<f64>>,
    pub active: Vec<usize>,
    /// Covariate value used for inactive bidders.
    pub fill: f64,
}

impl<'a, F: AuctionField + ?Sized> FieldPhi<'a, F> {
    /// Minimum-norm positive covariates hitting x: Z_j = x_j gamma_j / |gamma_j|^2.
    pub fn covariates(&self, x: &[f64]) -> Result<Covariates> {
        let n = self.field.n();
        let dim = self.field.dim();
        let mut vals = Vec::with_capacity(n * dim);
        for j in 0..n {
            if self.active.contains(&j) {
                let g = &self.slopes[j];
                let norm2: f64 = g.iter().map(|v| v * v).sum();
                if !(norm2 > 0.0) {
                    return Err(Error::diagnostic(format!(
                        "endpoint slope of bidder {} is zero",
                        j + 1
                    )));
                }
                vals.extend(g.iter().map(|v| x[j] * v / norm2));
            } else {
                vals.extend(std::iter::repeat_n(self.fill, dim));
            }
        }
        Covariates::new(n, dim, vals)
    }

    fn eval_interior(&self, x: &[f64]) -> Result<f64> {
        u_limit(self.field, self.alpha_star, &self.covariates(x)?)
    }
}

impl<F: AuctionField + ?Sized> PhiFn for FieldPhi<'_, F> {
    fn n(&self) -> usize {
        self.field.n()
    }

    /// Points with zero active coordinates are reached by extrapolation along the ray
    /// that lifts those coordinates.
    fn eval(&self, x: &[f64]) -> Result<f64> {
        let zero: Vec<usize> = self
            .active
            .iter()
            .cloned()
            .filter(|&j| x[j] <= 0.0)
            .collect();
        if zero.is_empty() {
            return self.eval_interior(x);
        }
        let hs = [0.004, 0.002, 0.001, 0.0005];
        let vals = hs
            .iter()
            .map(|&h| {
                let mut y = x.to_vec();
                for &j in &zero {
                    y[j] = h;
                }
                self.eval_interior(&y)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(*neville_to_zero(&hs, &vals).last().unwrap())
    }
}

/// Phi-hat tabulated on a rectangular grid over the active coordinates, evaluated by
/// tensor-product cubic Hermite interpolation with finite-difference slopes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhiTable {
    pub n: usize,
    pub active: Vec<usize>,
    pub axes: Vec<Vec<f64>>,
    /// Row-major over `axes` (last axis fastest).
    pub values: Vec<f64>,
}

fn hermite_weights(xs: &[f64], x: f64) -> Vec<(usize, f64)> {
    // Cubic Hermite in one axis written as a 4-point stencil on the table values.
    let m = xs.len();
    if m == 1 {
        return vec![(0, 1.0)];
    }
    let k = bracket(xs, x);
    let h = xs[k + 1] - xs[k];
    let t = (x - xs[k]) / h;
    let (t2, t3) = (t * t, t * t * t);
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    // Slope at node q as a combination of values.
    let slope = |q: usize| -> Vec<(usize, f64)> {
        if q == 0 {
            vec![(0, -1.0 / (xs[1] - xs[0])), (1, 1.0 / (xs[1] - xs[0]))]
        } else if q == m - 1 {
            vec![
                (m - 2, -1.0 / (xs[m - 1] - xs[m - 2])),
                (m - 1, 1.0 / (xs[m - 1] - xs[m - 2])),
            ]
        } else {
            let w = 1.0 / (xs[q + 1] - xs[q - 1]);
            vec![(q - 1, -w), (q + 1, w)]
        }
    };
    let mut out = vec![(k, h00), (k + 1, h01)];
    for (q, c) in slope(k) {
        out.push((q, h10 * h * c));
    }
    for (q, c) in slope(k + 1) {
        out.push((q, h11 * h * c));
    }
    out
}

impl PhiTable {
    /// Tabulate any PhiFn; coordinates outside `active` are held at zero.
    pub fn build<P: PhiFn + ?Sized>(
        phi: &P,
        active: &[usize],
        axes: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if axes.len() != active.len() || axes.iter().any(|a| a.is_empty()) {
            return Err(Error::invalid("one non-empty axis per active coordinate"));
        }
        let n = phi.n();
        let total: usize = axes.iter().map(|a| a.len()).product();
        let mut values = Vec::with_capacity(total);
        let mut idx = vec![0usize; axes.len()];
        for _ in 0..total {
            let mut x = vec![0.0; n];
            for (d, &j) in active.iter().enumerate() {
                x[j] = axes[d][idx[d]];
            }
            values.push(phi.eval(&x)?);
            for d in (0..idx.len()).rev() {
                idx[d] += 1;
                if idx[d] < axes[d].len() {
                    break;
                }
                idx[d] = 0;
            }
        }
        Ok(Self {
            n,
            active: active.to_vec(),
            axes,
            values,
        })
    }

    /// Sup difference against another PhiFn at the table nodes.
    pub fn sup_error<P: PhiFn + ?Sized>(&self, other: &P) -> Result<f64> {
        let reference = PhiTable::build(other, &self.active, self.axes.clone())?;
        Ok(self
            .values
            .iter()
            .zip(&reference.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Node coordinates (active coordinates only) in storage order.
    pub fn nodes(&self) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new()];
        for axis in &self.axes {
            out = out
                .into_iter()
                .flat_map(|p: Vec<f64>| {
                    axis.iter().map(move |&x| {
                        let mut v = p.clone();
                        v.push(x);
                        v
                    })
                })
                .collect();
        }
        out
    }
}

impl PhiFn for PhiTable {
    fn n(&self) -> usize {
        self.n
    }

    fn eval(&self, x: &[f64]) -> Result<f64> {
        let stencils: Vec<Vec<(usize, f64)>> = self
            .active
            .iter()
            .zip(&self.axes)
            .map(|(&j, axis)| hermite_weights(axis, x[j]))
            .collect();
        let strides: Vec<usize> = (0..self.axes.len())
            .map(|d| self.axes[d + 1..].iter().map(|a| a.len()).product())
            .collect();
        let mut total = 0.0;
        let mut pos = vec![0usize; stencils.len()];
        loop {
            let mut w = 1.0;
            let mut off = 0;
            for d in 0..stencils.len() {
                let (q, c) = stencils[d][pos[d]];
                w *= c;
                off += q * strides[d];
            }
            total += w * self.values[off];
            let mut d = stencils.len();
            loop {
                if d == 0 {
                    return Ok(total);
                }
                d -= 1;
                pos[d] += 1;
                if pos[d] < stencils[d].len() {
                    break;
                }
                pos[d] = 0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::linspace;

    #[test]
    fn table_reproduces_quadratics_closely() {
        let phi = Combiner::bilinear_interaction();
        let axes = vec![linspace(0.0, 2.0, 21), linspace(0.0, 2.0, 21)];
        let t = PhiTable::build(&phi, &[0, 1], axes).unwrap();
        for &(a, b) in &[(0.33, 1.71), (1.05, 0.02), (2.0, 2.0)] {
            let got = PhiFn::eval(&t, &[a, b]).unwrap();
            assert!((got - (a + b + a * b)).abs() < 1e-12, "{got}");
        }
    }

    #[test]
    fn table_partial_matches() {
        let phi = Combiner::additive(vec![1.0, 2.0]);
        let t = PhiTable::build(
            &phi,
            &[0, 1],
            vec![linspace(0.0, 1.0, 5), linspace(0.0, 1.0, 5)],
        )
        .unwrap();
        assert!((t.partial(1, &[0.4, 0.3]).unwrap() - 2.0).abs() < 1e-8);
    }
}
