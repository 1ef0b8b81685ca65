//! Refracting-RIS assisted multi-user URLLC downlink for high-speed trains:
//! channel synthesis, finite-blocklength rates, the alternating solver and
//! baseline schemes, plus seeded Monte-Carlo sweeps.

// `!(x > 0.0)` style checks reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod channel;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod rate;
pub mod solver;
pub mod units;

pub use error::{Error, Result};
