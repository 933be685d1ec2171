//! Common-value quantile read off the frontier value as the bidder's own noise vanishes.

use crate::error::{Error, Result};
use crate::field::AuctionField;
use crate::model::wilson::WilsonSpec;
use crate::model::Covariates;

/// gamma0(alpha) = lim_{Z_i -> inf} U(alpha | Z), extrapolated polynomially in 1/Z_i
/// from the values at `zi_sequence` with the opponents' covariates held at `z`.
pub fn recover_value_quantile<F: AuctionField + ?Sized>(
    field: &F,
    alphas: &[f64],
    z: &Covariates,
    zi_sequence: &[f64],
) -> Result<Vec<f64>> {
    if field.dim() != 1 {
        return Err(Error::invalid(
            "value-quantile recovery needs scalar covariates",
        ));
    }
    if zi_sequence.len() < 2
        || zi_sequence.windows(2).any(|w| !(w[1] > w[0]))
        || zi_sequence[0] <= 0.0
    {
        return Err(Error::invalid(
            "Z_i sequence must be positive and strictly increasing",
        ));
    }
    let i = field.bidder();
    alphas
        .iter()
        .map(|&a| {
            let vals = zi_sequence
                .iter()
                .map(|&s| field.u(a, &z.with(i, 0, s)))
                .collect::<Result<Vec<_>>>()?;
            Ok(WilsonSpec::extrapolate_limit(zi_sequence, &vals))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{OracleField, OracleValuation};
    use crate::model::ValueQuantile;
    use crate::strategy::StrategyProfile;

    #[test]
    fn lognormal_quantile_recovered() {
        let q = ValueQuantile::LogNormal { mu: 0.0, s: 0.5 };
        let spec = WilsonSpec::new(q.clone(), 2).unwrap();
        let p = StrategyProfile::symmetric_linear(2, 0.1, 0.5, 1).unwrap();
        let f = OracleField::new(OracleValuation::Wilson(spec), p, 0).unwrap();
        let z = Covariates::scalar(&[1.0, 1.0]).unwrap();
        let alphas: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
        let got = recover_value_quantile(&f, &alphas, &z, &[5.0, 10.0, 20.0, 40.0]).unwrap();
        for (a, g) in alphas.iter().zip(&got) {
            let t = q.quantile(*a);
            assert!(((g - t) / t).abs() < 0.02, "alpha {a}: {g} vs {t}");
        }
    }
}
