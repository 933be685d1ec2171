//! Identification and estimation of first-price auctions with mixed signals.
//!
//! Each bidder's value is a combination of covariate-weighted mixed signals,
//! V_i = Phi_i(Z_1' gamma_i1(A_1), ..., Z_n' gamma_in(A_n)). The crate simulates
//! equilibrium bids, builds the auction field from bids, recovers the primitives
//! and runs revenue counterfactuals.

pub mod counterfactual;
pub mod error;
pub mod field;
pub mod identify;
pub mod model;
pub mod numerics;
pub mod sieve;
pub mod strategy;

pub use error::{Error, Result};

/// Crate version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
