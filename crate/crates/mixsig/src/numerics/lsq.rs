//! Levenberg-Marquardt for small dense least-squares problems.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub ftol: f64,
    pub xtol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            ftol: 1e-15,
            xtol: 1e-14,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub x: Vec<f64>,
    /// Sum of squared residuals at x.
    pub cost: f64,
    pub iterations: usize,
}

/// Minimise |r(x)|^2 given r and its Jacobian. Only steps that lower the cost are taken,
/// so the returned cost never exceeds the starting one.
pub fn levenberg_marquardt<F>(mut f: F, x0: &[f64], opts: &LmOptions) -> Result<LmOutcome>
where
    F: FnMut(&[f64]) -> Result<(DVector<f64>, DMatrix<f64>)>,
{
    let mut x = x0.to_vec();
    let (mut r, mut jac) = f(&x)?;
    let mut cost = r.norm_squared();
    if !cost.is_finite() {
        return Err(Error::numerical(
            "least-squares cost is not finite at the start",
            None,
        ));
    }
    let p = x.len();
    if p == 0 {
        return Ok(LmOutcome {
            x,
            cost,
            iterations: 0,
        });
    }
    let mut mu = 1e-3;
    let mut iterations = 0;
    while iterations < opts.max_iter && cost > 0.0 {
        iterations += 1;
        let a = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let scale = a.diagonal().iter().cloned().fold(0.0, f64::max).max(1e-300);
        let mut accepted = None;
        for _ in 0..30 {
            let mut m = a.clone();
            for k in 0..p {
                m[(k, k)] += mu * a[(k, k)].max(1e-12 * scale);
            }
            let step = match m.clone().cholesky() {
                Some(c) => c.solve(&(-&g)),
                None => match m.lu().solve(&(-&g)) {
                    Some(s) => s,
                    None => {
                        mu *= 4.0;
                        continue;
                    }
                },
            };
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let (r_new, j_new) = f(&trial)?;
            let c_new = r_new.norm_squared();
            if c_new.is_finite() && c_new < cost {
                accepted = Some((trial, r_new, j_new, c_new, step.norm()));
                mu = (mu / 3.0).max(1e-15);
                break;
            }
            mu *= 4.0;
        }
        let Some((trial, r_new, j_new, c_new, step_norm)) = accepted else {
            break;
        };
        let gain = (cost - c_new) / cost;
        let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x = trial;
        r = r_new;
        jac = j_new;
        cost = c_new;
        if gain < opts.ftol || step_norm < opts.xtol * (xnorm + opts.xtol) {
            break;
        }
    }
    Ok(LmOutcome {
        x,
        cost,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_exponential_decay() {
        let ts: Vec<f64> = (0..20).map(|k| k as f64 * 0.1).collect();
        let ys: Vec<f64> = ts.iter().map(|t| 2.0 * (-1.3 * t).exp()).collect();
        let out = levenberg_marquardt(
            |x| {
                let r = DVector::from_iterator(
                    ts.len(),
                    ts.iter()
                        .zip(&ys)
                        .map(|(t, y)| x[0] * (-x[1] * t).exp() - y),
                );
                let j = DMatrix::from_fn(ts.len(), 2, |k, c| {
                    let e = (-x[1] * ts[k]).exp();
                    if c == 0 {
                        e
                    } else {
                        -x[0] * ts[k] * e
                    }
                });
                Ok((r, j))
            },
            &[1.0, 0.5],
            &LmOptions::default(),
        )
        .unwrap();
        assert!(
            (out.x[0] - 2.0).abs() < 1e-9 && (out.x[1] - 1.3).abs() < 1e-9,
            "{:?}",
            out.x
        );
    }
}
