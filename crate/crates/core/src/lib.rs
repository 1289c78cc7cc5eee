//! Hierarchical reinforcement learning for highway lane changes.
//!
//! A discrete Q-network decides *when* to change lanes, two continuous-action quadratic
//! Q-modules adjust longitudinal acceleration (car following, gap alignment), and a quintic
//! reference trajectory tracked by Pure Pursuit executes the maneuver. Everything runs in a
//! deterministic IDM traffic simulator.

// Validation is written as `!(x > 0.0)` so that NaN is rejected along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod error;
pub mod harness;
pub mod motion;
pub mod nn;
pub mod sim;
pub mod value;

pub use error::{Error, Result};
