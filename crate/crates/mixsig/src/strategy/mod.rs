//! Strategy profiles, winning probabilities, the symmetric first-price equilibrium
//! and bid simulation.

pub mod equilibrium;
pub mod payoff;
pub mod profile;
pub mod simulate;

pub use equilibrium::{
    best_response_base, slice_for, solve_symmetric_fpa, verify_best_response,
    EquilibriumSolveReport, GapReport, SolveOptions,
};
pub use payoff::{
    expected_payoff, frontier_value, frontier_value_density, frontier_value_pair, omega_ratio,
    truncated_value, winning_probability, winning_probability_at_bid, winning_probability_slope,
    Payoff, SignalQuadrature,
};
pub use profile::{BaseSpec, BidCurve, DeltaFn, ProfileSlice, StrategyProfile, Warp, WarpAt};
pub use simulate::{simulate_bids, BidDataset, BidRecord, Simulation, ZSampler};
