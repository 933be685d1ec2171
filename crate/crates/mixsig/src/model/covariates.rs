//! Covariate points Z = (Z_1, ..., Z_n), each Z_j a strictly positive D-vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covariates {
    n: usize,
    dim: usize,
    values: Vec<f64>,
}

impl Covariates {
    /// Row-major values: bidder j occupies `values[j*dim..(j+1)*dim]`.
    pub fn new(n: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || dim == 0 || values.len() != n * dim {
            return Err(Error::invalid(format!(
                "covariates need {}x{} values, got {}",
                n,
                dim,
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid(format!(
                "covariate coordinate (bidder {}, component {}) = {} is not strictly positive",
                k / dim + 1,
                k % dim + 1,
                values[k]
            )));
        }
        Ok(Self { n, dim, values })
    }

    /// One scalar covariate per bidder (D = 1).
    pub fn scalar(values: &[f64]) -> Result<Self> {
        Self::new(values.len(), 1, values.to_vec())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, j: usize, d: usize) -> f64 {
        self.values[j * self.dim + d]
    }

    pub fn bidder(&self, j: usize) -> &[f64] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    /// Copy with coordinate (j, d) replaced. The new value must stay positive.
    pub fn with(&self, j: usize, d: usize, v: f64) -> Self {
        let mut c = self.clone();
        c.values[j * self.dim + d] = v;
        c
    }

    /// Copy with the whole block of bidder j multiplied by `s`.
    pub fn scale_bidder(&self, j: usize, s: f64) -> Self {
        let mut c = self.clone();
        for v in &mut c.values[j * self.dim..(j + 1) * self.dim] {
            *v *= s;
        }
        c
    }

    /// Copy with every coordinate multiplied by `s`.
    pub fn scale_all(&self, s: f64) -> Self {
        let mut c = self.clone();
        for v in &mut c.values {
            *v *= s;
        }
        c
    }

    /// Z_j' g for a D-vector g.
    pub fn dot(&self, j: usize, g: &[f64]) -> f64 {
        self.bidder(j).iter().zip(g).map(|(a, b)| a * b).sum()
    }

    /// Same covariates with bidders listed in a new order.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for &j in order {
            values.extend_from_slice(self.bidder(j));
        }
        Self {
            n: self.n,
            dim: self.dim,
            values,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_nonpositive_coordinates() {
        let e = Covariates::new(2, 1, vec![1.0, 0.0]).unwrap_err();
        assert!(format!("{e}").contains("bidder 2"));
        assert!(Covariates::new(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn accessors() {
        let z = Covariates::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(z.bidder(1), &[3.0, 4.0]);
        assert_eq!(z.dot(0, &[1.0, 1.0]), 3.0);
        assert_eq!(z.scale_bidder(1, 2.0).get(1, 1), 8.0);
        assert_eq!(z.permuted(&[1, 0]).bidder(0), &[3.0, 4.0]);
    }
}
