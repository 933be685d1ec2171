//! Adaptive Dormand-Prince 5(4) integrator.
//!
//! The integrator steps exactly onto every requested output point, so the
//! returned states carry no interpolation error. Integration may run forward or
//! backward; the output points only need to be monotone in the chosen direction.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// First trial step (absolute value); `None` picks one from the RHS scale.
    pub h_init: Option<f64>,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-12,
            h_init: None,
            h_min: 1e-14,
            max_steps: 1_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OdeOutput {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    /// Right-hand side at each output point.
    pub dy: Vec<Vec<f64>>,
    pub accepted: usize,
    pub rejected: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrate y' = f(t, y) from (t0, y0) through the output points.
pub fn dopri5<F>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    outputs: &[f64],
    opts: OdeOptions,
) -> Result<OdeOutput>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y0.len();
    let mut out = OdeOutput {
        t: Vec::with_capacity(outputs.len()),
        y: Vec::with_capacity(outputs.len()),
        dy: Vec::with_capacity(outputs.len()),
        accepted: 0,
        rejected: 0,
    };
    if outputs.is_empty() {
        return Ok(out);
    }
    let dir = if outputs[outputs.len() - 1] >= t0 {
        1.0
    } else {
        -1.0
    };
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    f(t, &y, &mut k1)?;
    let scale0: f64 = y
        .iter()
        .zip(&k1)
        .map(|(yi, ki)| ki.abs() / (opts.atol + opts.rtol * yi.abs()))
        .fold(0.0, f64::max);
    let span = (outputs[outputs.len() - 1] - t0).abs().max(1e-300);
    let mut h = opts
        .h_init
        .unwrap_or_else(|| {
            if scale0 > 0.0 {
                (0.01 / scale0).min(span)
            } else {
                span * 1e-3
            }
        })
        .max(opts.h_min);

    let mut k = vec![vec![0.0; n]; 7];
    let mut ytmp = vec![0.0; n];
    let mut ynew = vec![0.0; n];
    let mut steps = 0usize;

    for &target in outputs {
        if (target - t) * dir < -1e-15 * (1.0 + t.abs()) {
            return Err(Error::invalid("ode output points must be monotone"));
        }
        while (target - t) * dir > 1e-15 * (1.0 + t.abs()) {
            steps += 1;
            if steps > opts.max_steps {
                return Err(Error::numerical(
                    format!("ode step budget exhausted at t={t}"),
                    None,
                ));
            }
            let remaining = (target - t).abs();
            let mut hs = h.min(remaining);
            let last = hs >= remaining;
            if last {
                hs = remaining;
            }
            let hh = hs * dir;
            k[0].copy_from_slice(&k1);
            for i in 0..n {
                ytmp[i] = y[i] + hh * A21 * k[0][i];
            }
            let (k0, rest) = k.split_at_mut(1);
            f(t + C2 * hh, &ytmp, &mut rest[0])?;
            for i in 0..n {
                ytmp[i] = y[i] + hh * (A31 * k0[0][i] + A32 * rest[0][i]);
            }
            f(t + C3 * hh, &ytmp, &mut rest[1])?;
            for i in 0..n {
                ytmp[i] = y[i] + hh * (A41 * k0[0][i] + A42 * rest[0][i] + A43 * rest[1][i]);
            }
            f(t + C4 * hh, &ytmp, &mut rest[2])?;
            for i in 0..n {
                ytmp[i] =
                    y[i] + hh
                        * (A51 * k0[0][i] + A52 * rest[0][i] + A53 * rest[1][i] + A54 * rest[2][i]);
            }
            f(t + C5 * hh, &ytmp, &mut rest[3])?;
            for i in 0..n {
                ytmp[i] = y[i]
                    + hh * (A61 * k0[0][i]
                        + A62 * rest[0][i]
                        + A63 * rest[1][i]
                        + A64 * rest[2][i]
                        + A65 * rest[3][i]);
            }
            f(t + hh, &ytmp, &mut rest[4])?;
            for i in 0..n {
                ynew[i] = y[i]
                    + hh * (B1 * k0[0][i]
                        + B3 * rest[1][i]
                        + B4 * rest[2][i]
                        + B5 * rest[3][i]
                        + B6 * rest[4][i]);
            }
            let tn = if last { target } else { t + hh };
            f(tn, &ynew, &mut rest[5])?;
            let mut err: f64 = 0.0;
            for i in 0..n {
                let e = hh
                    * (E1 * k0[0][i]
                        + E3 * rest[1][i]
                        + E4 * rest[2][i]
                        + E5 * rest[3][i]
                        + E6 * rest[4][i]
                        + E7 * rest[5][i]);
                let sc = opts.atol + opts.rtol * y[i].abs().max(ynew[i].abs());
                err = err.max((e / sc).abs());
            }
            if !err.is_finite() {
                out.rejected += 1;
                h = hs * 0.25;
                if h < opts.h_min {
                    return Err(Error::numerical(format!("ode blow-up near t={t}"), None));
                }
                continue;
            }
            if err <= 1.0 {
                t = tn;
                y.copy_from_slice(&ynew);
                k1.copy_from_slice(&rest[5]);
                out.accepted += 1;
                let fac = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                if !last || fac < 1.0 {
                    h = hs * fac;
                } else {
                    h = h.max(hs * fac.min(1.0));
                }
            } else {
                out.rejected += 1;
                h = hs * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
                if h < opts.h_min {
                    return Err(Error::numerical(
                        format!("ode step size underflow at t={t}"),
                        Some(err),
                    ));
                }
            }
        }
        out.t.push(target);
        out.y.push(y.clone());
        out.dy.push(k1.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_forward_and_backward() {
        let outs: Vec<f64> = (1..=10).map(|k| k as f64 * 0.1).collect();
        let r = dopri5(
            |_, y, dy| {
                dy[0] = -2.0 * y[0];
                Ok(())
            },
            0.0,
            &[1.0],
            &outs,
            OdeOptions {
                rtol: 1e-10,
                ..Default::default()
            },
        )
        .unwrap();
        for (t, y) in r.t.iter().zip(&r.y) {
            assert!((y[0] - (-2.0 * t).exp()).abs() < 1e-9);
        }
        let back: Vec<f64> = (0..10).rev().map(|k| k as f64 * 0.1).collect();
        let r = dopri5(
            |_, y, dy| {
                dy[0] = y[1];
                dy[1] = -y[0];
                Ok(())
            },
            1.0,
            &[1f64.sin(), 1f64.cos()],
            &back,
            OdeOptions {
                rtol: 1e-10,
                ..Default::default()
            },
        )
        .unwrap();
        for (t, y) in r.t.iter().zip(&r.y) {
            assert!((y[0] - t.sin()).abs() < 1e-9);
        }
    }
}
