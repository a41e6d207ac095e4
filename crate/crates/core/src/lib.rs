//! Tracking performatively stable points of time-varying stochastic
//! optimization problems whose data distribution depends on the decision.
//!
//! The crate provides online projected gradient descent with exact and
//! mini-batch gradients, the tracking-error envelopes that bound it, a
//! sub-Weibull tail calculus for the gradient noise, and a Monte Carlo
//! harness for a fleet-charging scenario.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod bounds;
pub mod distmap;
pub mod error;
pub mod harness;
pub mod problem;
pub mod projection;
pub mod sequence;
pub mod subweibull;
pub mod vector;

pub use error::{Error, Result};
