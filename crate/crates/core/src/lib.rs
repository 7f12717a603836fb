//! Sampling-based approximation of Gittins indices for general Markov reward
//! processes.
//!
//! The index of a state is the charge `ν` at which the optimal stopping
//! value of the charged, truncated reward process is zero. [`tree`]
//! estimates that value by nested simulation, [`solver`] finds its root by
//! stochastic approximation, and [`baselines`] provides exact values for
//! Bernoulli and Gaussian arms to compare against.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod fabp;
pub mod harness;
pub mod models;
pub mod rng;
pub mod solver;
pub mod tree;

pub use error::{Error, Result};
pub use fabp::{
    scaled_costs, simulate_path, DiscountFactor, FiniteModel, MarkovRewardModel, SamplePath, TruncationConfig,
};
pub use rng::{Stream, StreamKey};
pub use solver::{solve, SolverConfig, SolverResult, StepKind, StepSizeRule, StopReason};
pub use tree::{estimate, exact_stopping_value, exact_zk_sum, PathTreeEstimate, ReplicationSchedule};
