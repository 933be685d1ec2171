//! Gaussian quadrature rules built by the Golub-Welsch eigenvalue method.

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights of a Gaussian rule.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn golub_welsch(diag: &[f64], offdiag: &[f64], mu0: f64) -> Rule {
    let n = diag.len();
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        jac[(i, i)] = diag[i];
        if i + 1 < n {
            jac[(i, i + 1)] = offdiag[i];
            jac[(i + 1, i)] = offdiag[i];
        }
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Rule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

/// Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n >= 1);
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        })
        .collect();
    let mut rule = golub_welsch(&diag, &off, 2.0);
    // Legendre nodes are symmetric; enforce it to kill eigen-solver noise.
    for k in 0..n / 2 {
        let x = 0.5 * (rule.nodes[n - 1 - k] - rule.nodes[k]);
        let w = 0.5 * (rule.weights[n - 1 - k] + rule.weights[k]);
        rule.nodes[k] = -x;
        rule.nodes[n - 1 - k] = x;
        rule.weights[k] = w;
        rule.weights[n - 1 - k] = w;
    }
    if n % 2 == 1 {
        rule.nodes[n / 2] = 0.0;
    }
    rule
}

/// Gauss-Hermite rule for the standard normal weight: sum w_k f(x_k) ~ E f(N(0,1)).
pub fn gauss_hermite_normal(n: usize) -> Rule {
    assert!(n >= 1);
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..n).map(|k| (k as f64).sqrt()).collect();
    let mut rule = golub_welsch(&diag, &off, 1.0);
    for k in 0..n / 2 {
        let x = 0.5 * (rule.nodes[n - 1 - k] - rule.nodes[k]);
        let w = 0.5 * (rule.weights[n - 1 - k] + rule.weights[k]);
        rule.nodes[k] = -x;
        rule.nodes[n - 1 - k] = x;
        rule.weights[k] = w;
        rule.weights[n - 1 - k] = w;
    }
    if n % 2 == 1 {
        rule.nodes[n / 2] = 0.0;
    }
    rule
}

impl Rule {
    /// Integrate `f` over [a, b] (Legendre rules only).
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let mut s = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(mid + half * x);
        }
        s * half
    }

    /// Composite version with `panels` equal sub-intervals.
    pub fn integrate_composite<F: FnMut(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        panels: usize,
        mut f: F,
    ) -> f64 {
        let panels = panels.max(1);
        let h = (b - a) / panels as f64;
        let mut s = 0.0;
        for p in 0..panels {
            let lo = a + h * p as f64;
            s += self.integrate(lo, lo + h, &mut f);
        }
        s
    }

    /// Expectation against the normal weight (Hermite rules only).
    pub fn expect<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(*x))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let r = gauss_legendre(10);
        let v = r.integrate(0.0, 2.0, |x| x.powi(19));
        assert!((v - 2f64.powi(20) / 20.0).abs() < 1e-8 * 2f64.powi(20) / 20.0);
        let s: f64 = r.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn hermite_moments() {
        let r = gauss_hermite_normal(64);
        assert!((r.expect(|_| 1.0) - 1.0).abs() < 1e-13);
        assert!((r.expect(|x| x * x) - 1.0).abs() < 1e-12);
        assert!((r.expect(|x| x.powi(4)) - 3.0).abs() < 1e-11);
        // E exp(X) = exp(1/2)
        assert!((r.expect(|x| x.exp()) - 0.5f64.exp()).abs() < 1e-12);
    }
}
