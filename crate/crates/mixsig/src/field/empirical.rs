//! Auction field estimated from bids.
//!
//! Bid quantiles B_j(alpha | Z) come from kernel-weighted local polynomial quantile
//! regression in Z, rearranged to be monotone in alpha. Slopes in alpha come from a
//! local quadratic over neighbouring quantile levels. Signals are imputed as
//! G_j(bid | Z) and Omega is built from a boundary-reflected kernel estimate of their
//! joint density.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AuctionField;
use crate::error::{Error, Result};
use crate::model::Covariates;
use crate::numerics::interp::{linear, CubicHermite};
use crate::numerics::special::{norm_cdf, norm_pdf};
use crate::strategy::BidDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmootherConfig {
    /// Half-width of the product Epanechnikov kernel on vec(Z). Chosen from the data when absent.
    pub z_bandwidth: Option<f64>,
    /// Polynomial order in Z of the local quantile regression (0, 1 or 2).
    pub z_order: usize,
    /// Number of interior quantile levels fitted.
    pub alpha_points: usize,
    /// Half-width of the local quadratic in alpha used for B'.
    pub alpha_window: f64,
    /// Gaussian kernel bandwidth for the imputed signals. Chosen from the data when absent.
    pub signal_bandwidth: Option<f64>,
    /// Minimum number of auctions inside the Z kernel.
    pub min_local_sample: usize,
    /// Covariate points at which signals are imputed; a quantile grid when absent.
    pub z_nodes: Option<Vec<Covariates>>,
    /// Grid levels per coordinate for the default node grid.
    pub node_levels: usize,
    pub max_iter: usize,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        Self {
            z_bandwidth: None,
            z_order: 2,
            alpha_points: 99,
            alpha_window: 0.06,
            signal_bandwidth: None,
            min_local_sample: 100,
            z_nodes: None,
            node_levels: 5,
            max_iter: 60,
        }
    }
}

/// Quantile table of one bidder at one covariate point.
#[derive(Debug, Clone)]
struct BidTable {
    alphas: Vec<f64>,
    slopes: Vec<f64>,
    curve: CubicHermite,
}

impl BidTable {
    fn bid(&self, a: f64) -> f64 {
        self.curve.eval(a.clamp(0.0, 1.0))
    }

    fn slope(&self, a: f64) -> f64 {
        linear(&self.alphas, &self.slopes, a.clamp(0.0, 1.0))
    }

    fn level(&self, b: f64) -> f64 {
        self.curve.inverse(b).clamp(0.0, 1.0)
    }
}

#[derive(Debug)]
struct ZTables {
    bids: Vec<BidTable>,
    /// Auctions inside the kernel and their weights.
    kernel: Vec<(usize, f64)>,
}

pub struct EmpiricalField {
    n: usize,
    dim: usize,
    i: usize,
    cfg: SmootherConfig,
    z_bandwidth: f64,
    signal_bandwidth: f64,
    /// vec(Z) per auction, row-major.
    zs: Vec<f64>,
    /// bids[j][k] for bidder j in auction k.
    bids: Vec<Vec<f64>>,
    /// Imputed signals, imputed[k * n + j].
    imputed: Vec<f64>,
    cache: Mutex<HashMap<Vec<u64>, Arc<ZTables>>>,
}

fn key(z: &[f64]) -> Vec<u64> {
    z.iter().map(|v| v.to_bits()).collect()
}

fn mean_sd(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let m = xs.clone().sum::<f64>() / n;
    let v = xs.map(|x| (x - m) * (x - m)).sum::<f64>() / n.max(2.0);
    (m, v.sqrt())
}

/// Build the empirical field for bidder `i` (0-based).
pub fn empirical_field(
    data: &BidDataset,
    i: usize,
    cfg: &SmootherConfig,
) -> Result<EmpiricalField> {
    data.validate()?;
    let n = data.n;
    if i >= n {
        return Err(Error::invalid("bidder index out of range"));
    }
    if cfg.z_order > 2 || cfg.alpha_points < 9 || !(cfg.alpha_window > 0.0) {
        return Err(Error::invalid(
            "smoother needs z_order <= 2, alpha_points >= 9 and a positive alpha_window",
        ));
    }
    let m = data.auctions();
    let p = n * data.dim;
    let mut zs = Vec::with_capacity(m * p);
    let mut bids = vec![Vec::with_capacity(m); n];
    for k in 0..m {
        for (j, r) in data.auction(k).iter().enumerate() {
            zs.extend_from_slice(&r.z);
            bids[j].push(r.bid);
        }
    }

    let mut distinct: Vec<Vec<f64>> = Vec::new();
    let mut seen = HashMap::new();
    for k in 0..m {
        let row = &zs[k * p..(k + 1) * p];
        if seen.insert(key(row), ()).is_none() {
            distinct.push(row.to_vec());
            if distinct.len() > 64 {
                break;
            }
        }
    }
    let discrete = distinct.len() <= 64;

    let z_bandwidth = match cfg.z_bandwidth {
        Some(h) if h > 0.0 => h,
        Some(_) => return Err(Error::invalid("z_bandwidth must be positive")),
        None if discrete => {
            // Half the smallest sup-distance between support points: each kernel sees one point.
            let mut best = f64::INFINITY;
            for a in 0..distinct.len() {
                for b in a + 1..distinct.len() {
                    let d = distinct[a]
                        .iter()
                        .zip(&distinct[b])
                        .map(|(x, y)| (x - y).abs())
                        .fold(0.0, f64::max);
                    best = best.min(d);
                }
            }
            if best.is_finite() {
                0.5 * best
            } else {
                1.0
            }
        }
        None => {
            let sd = (0..p)
                .map(|c| mean_sd((0..m).map(|k| zs[k * p + c])).1)
                .sum::<f64>()
                / p as f64;
            2.34 * sd * (m as f64).powf(-1.0 / (p as f64 + 4.0))
        }
    };

    let nodes: Vec<Vec<f64>> = match &cfg.z_nodes {
        Some(v) => {
            if v.iter().any(|z| z.n() != n || z.dim() != data.dim) {
                return Err(Error::invalid("z_nodes have the wrong shape"));
            }
            v.iter().map(|z| z.values().to_vec()).collect()
        }
        None if discrete => distinct.clone(),
        None => quantile_grid(&zs, p, m, cfg.node_levels.max(2)),
    };

    let signal_bandwidth = match cfg.signal_bandwidth {
        Some(h) if h > 0.0 => h,
        Some(_) => return Err(Error::invalid("signal_bandwidth must be positive")),
        None => {
            let local = m as f64 / nodes.len().max(1) as f64;
            (0.6 * local.powf(-1.0 / (n as f64 + 4.0))).clamp(0.02, 0.25)
        }
    };

    let mut field = EmpiricalField {
        n,
        dim: data.dim,
        i,
        cfg: cfg.clone(),
        z_bandwidth,
        signal_bandwidth,
        zs,
        bids,
        imputed: Vec::new(),
        cache: Mutex::new(HashMap::new()),
    };

    let tables: Vec<Option<Arc<ZTables>>> =
        nodes.par_iter().map(|z| field.tables_at(z).ok()).collect();
    if tables.iter().all(|t| t.is_none()) {
        return Err(Error::diagnostic(
            "no imputation node has enough nearby auctions",
        ));
    }
    let mut imputed = vec![f64::NAN; m * n];
    for k in 0..m {
        let row = &field.zs[k * p..(k + 1) * p];
        let mut best = (f64::INFINITY, None);
        for (node, t) in nodes.iter().zip(&tables) {
            if let Some(t) = t {
                let d: f64 = node.iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best.0 {
                    best = (d, Some(t));
                }
            }
        }
        let t = best.1.expect("at least one node table");
        for j in 0..n {
            imputed[k * n + j] = t.bids[j].level(field.bids[j][k]);
        }
    }
    field.imputed = imputed;
    Ok(field)
}

fn quantile_grid(zs: &[f64], p: usize, m: usize, levels: usize) -> Vec<Vec<f64>> {
    let mut axes = Vec::with_capacity(p);
    for c in 0..p {
        let mut v: Vec<f64> = (0..m).map(|k| zs[k * p + c]).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let pts: Vec<f64> = (0..levels)
            .map(|l| {
                let q = 0.1 + 0.8 * l as f64 / (levels - 1) as f64;
                v[((q * (m - 1) as f64).round() as usize).min(m - 1)]
            })
            .collect();
        axes.push(pts);
    }
    let mut out = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix: Vec<f64>| {
                axis.iter().map(move |&x| {
                    let mut v = prefix.clone();
                    v.push(x);
                    v
                })
            })
            .collect();
    }
    out
}

/// Weighted quantiles with linear interpolation between mid-weight plotting positions.
fn weighted_quantiles(y: &[f64], w: &[f64], levels: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..y.len()).collect();
    idx.sort_by(|&a, &b| y[a].partial_cmp(&y[b]).unwrap());
    let total: f64 = w.iter().sum();
    let mut pos = Vec::with_capacity(y.len());
    let mut cum = 0.0;
    for &k in &idx {
        pos.push((cum + 0.5 * w[k]) / total);
        cum += w[k];
    }
    let ys: Vec<f64> = idx.iter().map(|&k| y[k]).collect();
    levels.iter().map(|&a| linear(&pos, &ys, a)).collect()
}

/// Local polynomial quantile regression by iteratively reweighted least squares on the
/// majorized check loss. Returns the intercepts, the fitted values at Delta = 0.
fn local_quantile_regression(
    x: &DMatrix<f64>,
    y: &[f64],
    w: &[f64],
    levels: &[f64],
    max_iter: usize,
) -> Vec<f64> {
    let (rows, cols) = x.shape();
    let spread = {
        let (lo, hi) = y
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                (a.min(v), b.max(v))
            });
        (hi - lo).max(1e-12)
    };
    let eps = 1e-6 * spread;
    let start = weighted_quantiles(y, w, levels);
    let mut beta = DVector::zeros(cols);
    let mut out = Vec::with_capacity(levels.len());
    for (l, &tau) in levels.iter().enumerate() {
        if l == 0 {
            beta[0] = start[0];
        } else {
            beta[0] += start[l] - start[l - 1];
        }
        for _ in 0..max_iter {
            let mut a = DMatrix::<f64>::zeros(cols, cols);
            let mut rhs = DVector::<f64>::zeros(cols);
            for r in 0..rows {
                let xr = x.row(r);
                let fit = (xr * &beta)[0];
                let res = y[r] - fit;
                let v = w[r] / (eps + res.abs());
                for c in 0..cols {
                    let vc = v * xr[c];
                    rhs[c] += vc * y[r] + (2.0 * tau - 1.0) * w[r] * xr[c];
                    for d in 0..=c {
                        a[(c, d)] += vc * xr[d];
                    }
                }
            }
            let trace: f64 = (0..cols).map(|c| a[(c, c)]).sum();
            for c in 0..cols {
                for d in 0..c {
                    a[(d, c)] = a[(c, d)];
                }
                if c > 0 {
                    a[(c, c)] += 1e-9 * trace;
                }
            }
            let next = match a.clone().cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => match a.pseudo_inverse(1e-12) {
                    Ok(pinv) => pinv * rhs,
                    Err(_) => break,
                },
            };
            let change = (&next - &beta).amax();
            beta = next;
            if change < 1e-9 * spread {
                break;
            }
        }
        out.push(beta[0]);
    }
    out
}

/// Slope and value at each grid point from a local quadratic over points within `window`.
fn local_quadratic(xs: &[f64], ys: &[f64], at: &[f64], window: f64) -> Vec<(f64, f64)> {
    at.iter()
        .map(|&a| {
            let mut lo = (a - window).max(0.0);
            let mut hi = (a + window).min(1.0);
            // Keep the window width constant at the ends.
            if lo == 0.0 {
                hi = (2.0 * window).min(1.0);
            }
            if hi == 1.0 {
                lo = (1.0 - 2.0 * window).max(0.0);
            }
            let pts: Vec<usize> = (0..xs.len())
                .filter(|&k| xs[k] >= lo - 1e-12 && xs[k] <= hi + 1e-12)
                .collect();
            let mut m = DMatrix::zeros(pts.len(), 3);
            let mut v = DVector::zeros(pts.len());
            for (r, &k) in pts.iter().enumerate() {
                let d = xs[k] - a;
                m[(r, 0)] = 1.0;
                m[(r, 1)] = d;
                m[(r, 2)] = d * d;
                v[r] = ys[k];
            }
            let sol = (m.transpose() * &m)
                .try_inverse()
                .map(|inv| inv * m.transpose() * v)
                .unwrap_or_else(|| DVector::from_vec(vec![f64::NAN, f64::NAN, 0.0]));
            (sol[0], sol[1])
        })
        .collect()
}

impl EmpiricalField {
    pub fn z_bandwidth(&self) -> f64 {
        self.z_bandwidth
    }

    pub fn signal_bandwidth(&self) -> f64 {
        self.signal_bandwidth
    }

    pub fn auctions(&self) -> usize {
        self.bids[0].len()
    }

    /// Imputed signals of auction k.
    pub fn imputed_signals(&self, k: usize) -> &[f64] {
        &self.imputed[k * self.n..(k + 1) * self.n]
    }

    fn p(&self) -> usize {
        self.n * self.dim
    }

    fn kernel(&self, z: &[f64]) -> Vec<(usize, f64)> {
        let p = self.p();
        let h = self.z_bandwidth;
        (0..self.auctions())
            .filter_map(|k| {
                let row = &self.zs[k * p..(k + 1) * p];
                let mut w = 1.0;
                for (a, b) in row.iter().zip(z) {
                    let u = (a - b) / h;
                    if u.abs() >= 1.0 {
                        return None;
                    }
                    w *= 0.75 * (1.0 - u * u);
                }
                Some((k, w))
            })
            .collect()
    }

    fn tables_at(&self, z: &[f64]) -> Result<Arc<ZTables>> {
        let k = key(z);
        if let Some(t) = self.cache.lock().unwrap().get(&k) {
            return Ok(t.clone());
        }
        let kernel = self.kernel(z);
        if kernel.len() < self.cfg.min_local_sample {
            return Err(Error::diagnostic(format!(
                "only {} auctions within the covariate kernel at Z = {:?}",
                kernel.len(),
                z
            )));
        }
        let p = self.p();
        let m = self.cfg.alpha_points;
        let levels: Vec<f64> = (1..=m).map(|k| k as f64 / (m + 1) as f64).collect();
        let w: Vec<f64> = kernel.iter().map(|(_, w)| *w).collect();
        let deltas: Vec<Vec<f64>> = kernel
            .iter()
            .map(|(k, _)| {
                (0..p)
                    .map(|c| (self.zs[k * p + c] - z[c]) / self.z_bandwidth)
                    .collect()
            })
            .collect();
        let varies: Vec<usize> = (0..p)
            .filter(|&c| deltas.iter().any(|d| d[c].abs() > 1e-12))
            .collect();
        let design = if self.cfg.z_order == 0 || varies.is_empty() {
            None
        } else {
            let mut cols: Vec<Box<dyn Fn(&[f64]) -> f64>> = vec![Box::new(|_| 1.0)];
            for &c in &varies {
                cols.push(Box::new(move |d: &[f64]| d[c]));
            }
            if self.cfg.z_order == 2 {
                for (a, &c) in varies.iter().enumerate() {
                    for &e in &varies[a..] {
                        cols.push(Box::new(move |d: &[f64]| d[c] * d[e]));
                    }
                }
            }
            Some(DMatrix::from_fn(deltas.len(), cols.len(), |r, c| {
                cols[c](&deltas[r])
            }))
        };

        let mut bids = Vec::with_capacity(self.n);
        for j in 0..self.n {
            let y: Vec<f64> = kernel.iter().map(|(k, _)| self.bids[j][*k]).collect();
            let mut q = match &design {
                None => weighted_quantiles(&y, &w, &levels),
                Some(x) => local_quantile_regression(x, &y, &w, &levels, self.cfg.max_iter),
            };
            q.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut alphas = vec![0.0];
            alphas.extend_from_slice(&levels);
            alphas.push(1.0);
            let ends = local_quadratic(&levels, &q, &[0.0, 1.0], self.cfg.alpha_window);
            let mut ys = vec![ends[0].0.min(q[0])];
            ys.extend_from_slice(&q);
            ys.push(ends[1].0.max(q[m - 1]));
            let fits = local_quadratic(&alphas, &ys, &alphas, self.cfg.alpha_window);
            let slopes: Vec<f64> = fits.iter().map(|f| f.1.max(1e-12)).collect();
            // Strictly increasing values keep the inverse well defined.
            for k in 1..ys.len() {
                if ys[k] <= ys[k - 1] {
                    ys[k] = ys[k - 1] + 1e-12 * (1.0 + ys[k - 1].abs());
                }
            }
            let curve = CubicHermite::monotone(alphas.clone(), ys)?;
            bids.push(BidTable {
                alphas: alphas.clone(),
                slopes,
                curve,
            });
        }
        let t = Arc::new(ZTables { bids, kernel });
        self.cache.lock().unwrap().insert(k, t.clone());
        Ok(t)
    }

    fn tables(&self, z: &Covariates) -> Result<Arc<ZTables>> {
        if z.n() != self.n || z.dim() != self.dim {
            return Err(Error::invalid("covariate point has the wrong shape"));
        }
        self.tables_at(z.values())
    }

    fn kern(&self, a: f64, x: f64) -> f64 {
        let h = self.signal_bandwidth;
        (norm_pdf((a - x) / h) + norm_pdf((a + x) / h) + norm_pdf((2.0 - a - x) / h)) / h
    }

    /// Integral over [0, u] of the reflected kernel centred at x.
    fn kern_cdf(&self, u: f64, x: f64) -> f64 {
        let h = self.signal_bandwidth;
        (norm_cdf((u - x) / h) - norm_cdf(-x / h))
            + (norm_cdf((u + x) / h) - norm_cdf(x / h))
            + (norm_cdf((2.0 - x) / h) - norm_cdf((2.0 - u - x) / h))
    }

    /// (omega(alpha | alpha), d omega / d a at a = alpha), up to a common positive factor.
    fn omega_parts(&self, alpha: f64, z: &Covariates) -> Result<(f64, f64)> {
        let t = self.tables(z)?;
        let i = self.i;
        let n = self.n;
        let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let bi = t.bids[i].bid(alpha);
        let slope_i = t.bids[i].slope(alpha);
        let u: Vec<f64> = others.iter().map(|&j| t.bids[j].level(bi)).collect();
        let g: Vec<f64> = others
            .iter()
            .zip(&u)
            .map(|(&j, &uj)| slope_i / t.bids[j].slope(uj))
            .collect();
        let (mut num, mut den) = (0.0, 0.0);
        let mut cdfs = vec![0.0; others.len()];
        for &(k, w) in &t.kernel {
            let a = self.imputed_signals(k);
            let wk = w * self.kern(alpha, a[i]);
            if wk == 0.0 {
                continue;
            }
            for (c, &j) in others.iter().enumerate() {
                cdfs[c] = self.kern_cdf(u[c], a[j]);
            }
            num += wk * cdfs.iter().product::<f64>();
            for (c, &j) in others.iter().enumerate() {
                let rest: f64 = cdfs
                    .iter()
                    .enumerate()
                    .filter(|(d, _)| *d != c)
                    .map(|(_, v)| v)
                    .product();
                den += wk * g[c] * self.kern(u[c], a[j]) * rest;
            }
        }
        Ok((num, den))
    }
}

impl AuctionField for EmpiricalField {
    fn n(&self) -> usize {
        self.n
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn bidder(&self) -> usize {
        self.i
    }

    fn bid(&self, j: usize, alpha: f64, z: &Covariates) -> Result<f64> {
        Ok(self.tables(z)?.bids[j].bid(alpha))
    }

    fn bid_deriv(&self, j: usize, alpha: f64, z: &Covariates) -> Result<f64> {
        Ok(self.tables(z)?.bids[j].slope(alpha))
    }

    fn level(&self, j: usize, bid: f64, z: &Covariates) -> Result<f64> {
        Ok(self.tables(z)?.bids[j].level(bid))
    }

    fn gb(&self, j: usize, alpha: f64, z: &Covariates) -> Result<f64> {
        let t = self.tables(z)?;
        Ok(t.bids[j].level(t.bids[self.i].bid(alpha)))
    }

    fn gb_deriv(&self, j: usize, alpha: f64, z: &Covariates) -> Result<f64> {
        let t = self.tables(z)?;
        let u = t.bids[j].level(t.bids[self.i].bid(alpha));
        Ok(t.bids[self.i].slope(alpha) / t.bids[j].slope(u))
    }

    fn omega(&self, alpha: f64, z: &Covariates) -> Result<f64> {
        let (num, den) = self.omega_parts(alpha, z)?;
        if !(den > 0.0) {
            return Err(Error::numerical(
                format!("estimated winning-probability slope vanishes at alpha = {alpha}"),
                None,
            ));
        }
        Ok(num / den)
    }

    fn u(&self, alpha: f64, z: &Covariates) -> Result<f64> {
        let i = self.i;
        Ok(self.bid(i, alpha, z)? + self.bid_deriv(i, alpha, z)? * self.omega(alpha, z)?)
    }

    fn signal_density(&self, a: &[f64], z: &Covariates) -> Result<f64> {
        let t = self.tables(z)?;
        let (mut num, mut den) = (0.0, 0.0);
        for &(k, w) in &t.kernel {
            let s = self.imputed_signals(k);
            num += w * a
                .iter()
                .zip(s)
                .map(|(&x, &y)| self.kern(x, y))
                .product::<f64>();
            den += w;
        }
        Ok(num / den)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::examples;
    use crate::strategy::{simulate_bids, SolveOptions, StrategyProfile, ZSampler};

    #[test]
    fn weighted_quantiles_interpolate() {
        let y = [3.0, 1.0, 2.0, 4.0];
        let w = [1.0; 4];
        let q = weighted_quantiles(&y, &w, &[0.125, 0.5, 0.875]);
        assert!(
            (q[0] - 1.0).abs() < 1e-12 && (q[1] - 2.5).abs() < 1e-12 && (q[2] - 4.0).abs() < 1e-12
        );
    }

    #[test]
    fn regression_recovers_linear_quantiles() {
        // y = 1 + 2 d + e with e uniform on [0, 1]: the tau-quantile is 1 + tau + 2 d.
        let rows = 4000;
        let d: Vec<f64> = (0..rows)
            .map(|k| ((k * 7919) % rows) as f64 / rows as f64 - 0.5)
            .collect();
        let e: Vec<f64> = (0..rows).map(|k| (k as f64 + 0.5) / rows as f64).collect();
        let y: Vec<f64> = (0..rows).map(|k| 1.0 + 2.0 * d[k] + e[k]).collect();
        let x = DMatrix::from_fn(rows, 2, |r, c| if c == 0 { 1.0 } else { d[r] });
        let q = local_quantile_regression(&x, &y, &vec![1.0; rows], &[0.25, 0.5, 0.9], 200);
        for (got, tau) in q.iter().zip([0.25, 0.5, 0.9]) {
            assert!((got - (1.0 + tau)).abs() < 0.01, "{got} vs {}", 1.0 + tau);
        }
    }

    #[test]
    fn uniform_ipv_field_is_close() {
        let m = examples::uniform_ipv(2);
        let p = StrategyProfile::symmetric_linear(2, 0.0, 1.0, 1).unwrap();
        let z = Covariates::scalar(&[1.0, 1.0]).unwrap();
        let sim = simulate_bids(
            &m,
            &p,
            &ZSampler::Fixed { z: z.clone() },
            20_000,
            3,
            &SolveOptions::default(),
        )
        .unwrap();
        let f = empirical_field(&sim.data, 0, &SmootherConfig::default()).unwrap();
        for k in 1..10 {
            let a = k as f64 / 10.0;
            assert!((f.bid(0, a, &z).unwrap() - a).abs() < 0.02);
            assert!((f.bid_deriv(0, a, &z).unwrap() - 1.0).abs() < 0.15);
            assert!(
                (f.omega(a, &z).unwrap() - a).abs() < 0.05,
                "omega({a}) = {}",
                f.omega(a, &z).unwrap()
            );
        }
    }
}
