//! Simulation of a physical-virtual synchronization market: one roadside
//! unit sells DT-task execution to vehicles and a single AR ad slot to
//! billboard providers. Includes the delay and valuation model, the PViSA and
//! EPViSA auctions, an omniscient benchmark, incentive-property checkers and a
//! Monte Carlo experiment harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod channel_delay;
pub mod error;
pub mod experiments;
pub mod market_model;
pub mod mechanisms;
pub mod rng;
pub mod scenario_gen;
pub mod stats;
pub mod verification;
pub mod welfare;

pub use error::{Error, Result};
