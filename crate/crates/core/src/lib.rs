//! Simulation and analytics toolkit for blockchain transaction-fee auctions.
//!
//! The crate is organised bottom-up:
//!
//! - [`fee`]: fixed-point fee amounts and the value/base-unit scale.
//! - [`mech`]: transactions, protocol parameters and the three block pricing
//!   rules (generalized first price, uniform price at the K+1st bid, and the
//!   pay-minimum-included rule with fill penalty and declared-underfull blocks).
//! - [`distributions`]: value distributions, seeded streams and order-statistic
//!   Monte Carlo.
//! - [`strategy`]: bidding strategies and the strategic-gain calculus for users.
//! - [`manipulation`]: fake-bid insertion by miners under a windowed reward.
//! - [`chain`]: multi-block simulation with the rolling reward ledger.
//! - [`replay`]: counterfactual settlement of historical fee data.

pub mod chain;
pub mod distributions;
pub mod error;
pub mod fee;
pub mod manipulation;
pub mod mech;
pub mod replay;
pub mod stats;
pub mod strategy;

pub use error::{Error, Result};
pub use fee::{FeeAmount, ValueScale};
