//! Exact baselines and competing decision rules.

pub mod calibration;
pub mod policies;
