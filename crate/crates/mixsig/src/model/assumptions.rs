//! Executable checks of the maintained assumptions (G, P, A, Z, monotone valuation)
//! and of the two sufficient conditions for common initial bids.

use super::{Covariates, MixedSignalModel};
use crate::numerics::quadrature::gauss_legendre;
use crate::numerics::special::{norm_cdf, norm_pdf};

#[derive(Debug, Clone)]
pub struct GridSpec {
    /// Signal levels in [0, 1], at least two.
    pub alpha: Vec<f64>,
    /// Covariate points, at least one.
    pub z_points: Vec<Covariates>,
}

impl GridSpec {
    pub fn uniform(points: usize, z_points: Vec<Covariates>) -> Self {
        Self {
            alpha: crate::numerics::linspace(0.0, 1.0, points.max(2)),
            z_points,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckEntry {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct AssumptionReport {
    pub entries: Vec<CheckEntry>,
    /// Common Phi_i(0) with all gamma_ij(0) = 0.
    pub bne_common_origin: bool,
    /// Common Phi and common initial slopes.
    pub bne_common_combiner: bool,
}

impl AssumptionReport {
    /// True when every entry whose name starts with `prefix` passed.
    pub fn passed(&self, prefix: &str) -> bool {
        self.entries
            .iter()
            .filter(|e| e.name.starts_with(prefix))
            .all(|e| e.passed)
    }

    pub fn first_failure(&self, prefix: &str) -> Option<&CheckEntry> {
        self.entries
            .iter()
            .find(|e| e.name.starts_with(prefix) && !e.passed)
    }

    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for e in &self.entries {
            s.push_str(&format!(
                "{} {}: {}\n",
                if e.passed { "PASS" } else { "FAIL" },
                e.name,
                e.detail
            ));
        }
        s.push_str(&format!(
            "BNE common-origin condition: {}\nBNE common-combiner condition: {}\n",
            if self.bne_common_origin {
                "holds"
            } else {
                "does not hold"
            },
            if self.bne_common_combiner {
                "holds"
            } else {
                "does not hold"
            }
        ));
        s
    }
}

fn entry(name: String, passed: bool, detail: String) -> CheckEntry {
    CheckEntry {
        name,
        passed,
        detail,
    }
}

pub fn check_assumptions(model: &MixedSignalModel, grid: &GridSpec) -> AssumptionReport {
    let n = model.n();
    let mut entries = Vec::new();
    let alpha = &grid.alpha;

    entries.push(entry(
        "Z".into(),
        !grid.z_points.is_empty()
            && grid
                .z_points
                .iter()
                .all(|z| z.n() == n && z.dim() == model.dim()),
        format!(
            "{} covariate points, all strictly positive by construction",
            grid.z_points.len()
        ),
    ));

    // Assumption G: shape of every slope, plus the terminal / initial conditions.
    for i in 0..n {
        let active = model.combiner(i).active_set();
        for j in 0..n {
            let g = model.slope(i, j);
            let (ok, detail) = match g.shape_violation(alpha) {
                None => (
                    true,
                    "nonnegative, nondecreasing, one entry strictly increasing".into(),
                ),
                Some((msg, a)) => (false, format!("{msg} at alpha = {a:.4}")),
            };
            entries.push(entry(format!("G slope ({},{})", i + 1, j + 1), ok, detail));
        }
        let nonzero = |a: f64| {
            active
                .iter()
                .all(|&j| model.slope(i, j).eval(a).iter().any(|v| v.abs() > 0.0))
        };
        let terminal = nonzero(1.0);
        let initial = nonzero(0.0);
        entries.push(entry(
            format!("G terminal/initial bidder {}", i + 1),
            terminal || initial,
            format!("terminal condition {terminal}, initial condition {initial}"),
        ));
    }

    // Assumption P on a product grid covering the image of the mixed signals.
    for i in 0..n {
        let phi = model.combiner(i);
        let active = phi.active_set();
        let mut xmax = vec![0.0f64; n];
        for z in &grid.z_points {
            for j in 0..n {
                for &a in alpha {
                    xmax[j] = xmax[j].max(model.slope(i, j).index(z.bidder(j), a));
                }
            }
        }
        let per_axis: usize = if n <= 3 { 6 } else { 3 };
        let mut failure: Option<String> = None;
        if active.is_empty() {
            failure = Some("active set is empty".into());
        } else if !phi.is_differentiable() {
            failure = Some("combiner is not differentiable (hard max)".into());
        }
        let total = per_axis.pow(n as u32);
        for idx in 0..total {
            if failure.is_some() {
                break;
            }
            let mut rem = idx;
            let x: Vec<f64> = (0..n)
                .map(|j| {
                    let k = rem % per_axis;
                    rem /= per_axis;
                    xmax[j].max(1e-3) * k as f64 / (per_axis - 1) as f64
                })
                .collect();
            let v = phi.eval(&x);
            let at_origin = x.iter().all(|t| *t == 0.0);
            if !(v > 0.0 || (at_origin && v >= 0.0)) {
                failure = Some(format!("Phi = {v:.3e} not positive at x = {x:?}"));
                break;
            }
            for &j in &active {
                let d = phi.partial(j, &x);
                if !(d > 0.0) {
                    failure = Some(format!(
                        "dPhi/dx{} = {d:.3e} not positive at x = {x:?}",
                        j + 1
                    ));
                    break;
                }
            }
        }
        entries.push(entry(
            format!("P bidder {}", i + 1),
            failure.is_none(),
            failure.unwrap_or_else(|| {
                format!("positive with positive active partials on {total} points")
            }),
        ));
    }

    // Assumption A: positive density and uniform marginals.
    let copula = model.copula();
    let gl = gauss_legendre(16);
    let mut a_fail: Option<String> = None;
    'outer: for z in &grid.z_points {
        for &a in alpha.iter().filter(|a| **a > 0.0 && **a < 1.0) {
            let mut pt = vec![0.5; n];
            pt[0] = a;
            let d = copula.density(&pt, z);
            if !(d > 0.0) || !d.is_finite() {
                a_fail = Some(format!("density {d} at a = {pt:?}"));
                break 'outer;
            }
        }
        for &a in &[0.1, 0.5, 0.9] {
            // Integrate in normal scores: the copula density has power-type edge behaviour.
            let over = |f: &dyn Fn(f64) -> f64| {
                gl.integrate_composite(-9.0, 9.0, 12, |x| f(norm_cdf(x)) * norm_pdf(x))
            };
            let m = match n {
                2 => over(&|t| copula.density(&[a, t], z)),
                3 => over(&|t| over(&|s| copula.density(&[a, t, s], z))),
                _ => 1.0,
            };
            if (m - 1.0).abs() > 1e-4 {
                a_fail = Some(format!("marginal density {m:.6} at a = {a}"));
                break 'outer;
            }
        }
    }
    entries.push(entry(
        "A copula".into(),
        a_fail.is_none(),
        a_fail.unwrap_or_else(|| "strictly positive with uniform marginals".into()),
    ));

    // Monotone valuation in each own and opponent signal.
    for i in 0..n {
        let mut fail: Option<String> = None;
        'z: for z in &grid.z_points {
            for j in 0..n {
                let mut prev = f64::NEG_INFINITY;
                for &a in alpha {
                    let mut pt = vec![0.4; n];
                    pt[j] = a;
                    let v = model.evaluate_valuation(i, &pt, z).unwrap_or(f64::NAN);
                    if !(v >= prev - 1e-12) {
                        fail = Some(format!(
                            "V_{} decreases in A_{} at a = {a:.4}",
                            i + 1,
                            j + 1
                        ));
                        break 'z;
                    }
                    prev = v;
                }
            }
        }
        entries.push(entry(
            format!("Monotone valuation bidder {}", i + 1),
            fail.is_none(),
            fail.unwrap_or_else(|| "nondecreasing in every signal".into()),
        ));
    }

    // Sufficient conditions for a common initial bid.
    let origin = vec![0.0; n];
    let phi0: Vec<f64> = (0..n).map(|i| model.combiner(i).eval(&origin)).collect();
    let common_phi0 = phi0
        .iter()
        .all(|v| (v - phi0[0]).abs() <= 1e-12 * (1.0 + phi0[0].abs()));
    let zero_initial =
        (0..n).all(|i| (0..n).all(|j| model.slope(i, j).eval(0.0).iter().all(|v| *v == 0.0)));
    let probes: Vec<Vec<f64>> = (0..6)
        .map(|k| {
            (0..n)
                .map(|j| 0.05 + 0.9 * ((k * 5 + j * 3) % 7) as f64 / 7.0)
                .collect()
        })
        .collect();
    let common_phi = probes.iter().all(|x| {
        let v0 = model.combiner(0).eval(x);
        (1..n).all(|i| (model.combiner(i).eval(x) - v0).abs() <= 1e-12 * (1.0 + v0.abs()))
    });
    let common_initial_slopes = (0..n).all(|j| {
        let g0 = model.slope(0, j).eval(0.0);
        (1..n).all(|i| {
            model
                .slope(i, j)
                .eval(0.0)
                .iter()
                .zip(&g0)
                .all(|(a, b)| (a - b).abs() <= 1e-12)
        })
    });

    AssumptionReport {
        entries,
        bne_common_origin: common_phi0 && zero_initial,
        bne_common_combiner: common_phi && common_initial_slopes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{examples, Combiner, CombinerKind, Monomial, SignalCopula, SlopeFunction};

    fn grid() -> GridSpec {
        GridSpec::uniform(21, vec![Covariates::scalar(&[1.0, 1.5]).unwrap()])
    }

    #[test]
    fn additive_symmetric_passes() {
        let m = examples::additive_symmetric(
            2,
            SlopeFunction::linear(0.2, 1.0),
            SlopeFunction::linear(0.2, 1.0),
            SignalCopula::gaussian(2, 0.3).unwrap(),
        );
        let r = check_assumptions(&m, &grid());
        assert!(r.all_passed(), "{}", r.render());
        assert!(r.bne_common_combiner);
    }

    #[test]
    fn decreasing_slope_fails_g() {
        let bad = SlopeFunction::scalar(vec![0.0, 1.0, 0.1]).unwrap();
        let m = examples::additive_symmetric(
            2,
            bad,
            SlopeFunction::identity(),
            SignalCopula::independence(2),
        );
        let r = check_assumptions(&m, &grid());
        let f = r.first_failure("G slope").unwrap();
        assert!(f.detail.contains("decreasing"));
    }

    #[test]
    fn vanishing_partial_fails_p() {
        // Phi = x1 + x2 - x1 x2 on [0, 1.5]^2 has dPhi/dx1 = 1 - x2 <= 0 for x2 >= 1.
        let phi = Combiner::new(CombinerKind::Polynomial {
            n: 2,
            terms: vec![
                Monomial {
                    coef: 1.0,
                    powers: vec![1, 0],
                },
                Monomial {
                    coef: 1.0,
                    powers: vec![0, 1],
                },
                Monomial {
                    coef: -1.0,
                    powers: vec![1, 1],
                },
            ],
        })
        .unwrap();
        let m = examples::from_first_bidder(
            phi,
            vec![SlopeFunction::identity(), SlopeFunction::identity()],
            SignalCopula::independence(2),
        )
        .unwrap();
        let r = check_assumptions(&m, &grid());
        assert!(!r.passed("P bidder 1"));
    }
}
