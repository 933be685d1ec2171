//! Bid datasets and Monte Carlo simulation of auctions.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Covariates, MixedSignalModel};

use super::equilibrium::{slice_for, SolveOptions};
use super::profile::{ProfileSlice, StrategyProfile};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BidRecord {
    pub auction_id: u64,
    /// 0-based bidder index.
    pub bidder: usize,
    pub bid: f64,
    /// This bidder's covariate vector Z_j.
    pub z: Vec<f64>,
}

/// Long-format bids: n consecutive records per auction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BidDataset {
    pub n: usize,
    pub dim: usize,
    pub records: Vec<BidRecord>,
}

impl BidDataset {
    /// Validate and sort records by (auction, bidder).
    pub fn new(n: usize, dim: usize, mut records: Vec<BidRecord>) -> Result<Self> {
        if n < 2 || dim < 1 {
            return Err(Error::invalid("dataset needs n >= 2 and D >= 1"));
        }
        records.sort_by_key(|r| (r.auction_id, r.bidder));
        let ds = Self { n, dim, records };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::invalid("dataset is empty"));
        }
        if self.records.len() % self.n != 0 {
            return Err(Error::invalid("record count is not a multiple of n"));
        }
        for chunk in self.records.chunks(self.n) {
            let id = chunk[0].auction_id;
            for (k, r) in chunk.iter().enumerate() {
                if r.auction_id != id || r.bidder != k {
                    return Err(Error::invalid(format!(
                        "auction {id} does not have exactly one record per bidder 1..{}",
                        self.n
                    )));
                }
                if !(r.bid > 0.0) || !r.bid.is_finite() {
                    return Err(Error::invalid(format!(
                        "auction {id}: bid {} is not positive",
                        r.bid
                    )));
                }
                if r.z.len() != self.dim || r.z.iter().any(|v| !(*v > 0.0)) {
                    return Err(Error::invalid(format!(
                        "auction {id}, bidder {}: covariates must be {} positive values",
                        k + 1,
                        self.dim
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn auctions(&self) -> usize {
        self.records.len() / self.n
    }

    /// Records of auction number k (in sorted order).
    pub fn auction(&self, k: usize) -> &[BidRecord] {
        &self.records[k * self.n..(k + 1) * self.n]
    }

    pub fn covariates(&self, k: usize) -> Covariates {
        let vals: Vec<f64> = self
            .auction(k)
            .iter()
            .flat_map(|r| r.z.iter().cloned())
            .collect();
        Covariates::new(self.n, self.dim, vals).expect("validated covariates")
    }

    pub fn bids(&self, k: usize) -> Vec<f64> {
        self.auction(k).iter().map(|r| r.bid).collect()
    }
}

/// How covariates are drawn per auction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ZSampler {
    Fixed {
        z: Covariates,
    },
    /// Uniform over a finite support.
    Discrete {
        support: Vec<Covariates>,
    },
    /// Independent uniform draws on [lo, hi] for every coordinate.
    Box {
        n: usize,
        dim: usize,
        lo: f64,
        hi: f64,
    },
}

impl ZSampler {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Covariates {
        match self {
            ZSampler::Fixed { z } => z.clone(),
            ZSampler::Discrete { support } => support[rng.random_range(0..support.len())].clone(),
            ZSampler::Box { n, dim, lo, hi } => {
                let vals = (0..n * dim)
                    .map(|_| lo + (hi - lo) * rng.random::<f64>())
                    .collect();
                Covariates::new(*n, *dim, vals).expect("box sampler keeps positive covariates")
            }
        }
    }

    fn validate(&self, n: usize, dim: usize) -> Result<()> {
        let ok = |z: &Covariates| z.n() == n && z.dim() == dim;
        match self {
            ZSampler::Fixed { z } if !ok(z) => {
                Err(Error::invalid("fixed covariate has the wrong shape"))
            }
            ZSampler::Discrete { support } if support.is_empty() || !support.iter().all(ok) => Err(
                Error::invalid("discrete covariate support is empty or has the wrong shape"),
            ),
            ZSampler::Box {
                n: bn,
                dim: bd,
                lo,
                hi,
            } => {
                if *bn != n || *bd != dim {
                    Err(Error::invalid("covariate box has the wrong shape"))
                } else if !(*lo > 0.0 && hi >= lo) {
                    Err(Error::invalid("covariate box must satisfy 0 < lo <= hi"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    fn finite_support(&self) -> Option<Vec<Covariates>> {
        match self {
            ZSampler::Fixed { z } => Some(vec![z.clone()]),
            ZSampler::Discrete { support } => Some(support.clone()),
            ZSampler::Box { .. } => None,
        }
    }
}

/// A dataset plus the signals that generated it (ground truth for tests).
#[derive(Debug, Clone)]
pub struct Simulation {
    pub data: BidDataset,
    /// signals[k][j] for auction k.
    pub signals: Vec<Vec<f64>>,
}

fn auction_rng(seed: u64, auction: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(auction);
    rng
}

fn key(z: &Covariates) -> Vec<u64> {
    z.values().iter().map(|v| v.to_bits()).collect()
}

/// Simulate `auctions` auctions; each auction uses its own ChaCha stream, so the output
/// does not depend on the number of worker threads.
pub fn simulate_bids(
    model: &MixedSignalModel,
    profile: &StrategyProfile,
    sampler: &ZSampler,
    auctions: usize,
    seed: u64,
    opts: &SolveOptions,
) -> Result<Simulation> {
    let n = model.n();
    if profile.n() != n {
        return Err(Error::invalid("profile and model disagree on n"));
    }
    if auctions == 0 {
        return Err(Error::invalid("auction count must be at least 1"));
    }
    sampler.validate(n, model.dim())?;

    // Precompute slices on finite supports; boxes build slices per auction.
    let cache: Option<HashMap<Vec<u64>, ProfileSlice>> = match sampler.finite_support() {
        Some(support) => {
            let slices: Vec<(Vec<u64>, ProfileSlice)> = support
                .par_iter()
                .map(|z| Ok((key(z), slice_for(profile, model, z, opts)?)))
                .collect::<Result<_>>()?;
            Some(slices.into_iter().collect())
        }
        None => None,
    };

    let rows: Vec<(Vec<BidRecord>, Vec<f64>)> = (0..auctions as u64)
        .into_par_iter()
        .map(|id| {
            let mut rng = auction_rng(seed, id);
            let z = sampler.draw(&mut rng);
            let a = model.copula().sample(&z, &mut rng);
            let owned;
            let slice = match &cache {
                Some(c) => &c[&key(&z)],
                None => {
                    owned = slice_for(profile, model, &z, opts)?;
                    &owned
                }
            };
            let recs = (0..n)
                .map(|j| BidRecord {
                    auction_id: id,
                    bidder: j,
                    bid: slice.bid(j, a[j]),
                    z: z.bidder(j).to_vec(),
                })
                .collect();
            Ok((recs, a))
        })
        .collect::<Result<_>>()?;
    let mut records = Vec::with_capacity(auctions * n);
    let mut signals = Vec::with_capacity(auctions);
    for (r, a) in rows {
        records.extend(r);
        signals.push(a);
    }
    let data = BidDataset {
        n,
        dim: model.dim(),
        records,
    };
    data.validate()?;
    Ok(Simulation { data, signals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::examples;

    #[test]
    fn deterministic_under_seed() {
        let m = examples::uniform_ipv(2);
        let p = StrategyProfile::symmetric_linear(2, 0.01, 0.5, 1).unwrap();
        let s = ZSampler::Box {
            n: 2,
            dim: 1,
            lo: 0.5,
            hi: 2.0,
        };
        let o = SolveOptions::default();
        let a = simulate_bids(&m, &p, &s, 50, 11, &o).unwrap();
        let b = simulate_bids(&m, &p, &s, 50, 11, &o).unwrap();
        assert_eq!(a.data, b.data);
        let c = simulate_bids(&m, &p, &s, 50, 12, &o).unwrap();
        assert_ne!(a.data, c.data);
        assert_eq!(a.data.records.len(), 100);
    }

    #[test]
    fn rejects_ragged_auctions() {
        let r = |id, bidder| BidRecord {
            auction_id: id,
            bidder,
            bid: 1.0,
            z: vec![1.0],
        };
        assert!(BidDataset::new(2, 1, vec![r(0, 0), r(0, 1), r(1, 0)]).is_err());
        assert!(BidDataset::new(2, 1, vec![r(0, 0), r(0, 0)]).is_err());
        assert!(BidDataset::new(2, 1, vec![]).is_err());
        assert!(BidDataset::new(2, 1, vec![r(0, 1), r(0, 0)]).is_ok());
    }
}
