//! Table sweeps and bandit experiments.

pub mod bootstrap;
pub mod experiment;
pub mod presets;
pub mod table;
