//! Named parameterisations of the published tables and experiments.

use crate::error::{Error, Result};
use crate::harness::experiment::ExperimentConfig;
use crate::harness::table::{Column, Family, TableSpec};

/// The 6 × 6 Bernoulli grid `Ψ = 1..6`, `κ - Ψ = 1..6`, row-major in `Ψ`.
pub fn bernoulli_grid() -> Vec<(f64, f64)> {
    (1..=6).flat_map(|p| (1..=6).map(move |f| (p as f64, (p + f) as f64))).collect()
}

/// Gaussian states `(0, κ)` for `κ = 1..10, 20, 30, 40, 50`.
pub fn gaussian_grid() -> Vec<(f64, f64)> {
    (1..=10).chain([20, 30, 40, 50]).map(|k| (0.0, k as f64)).collect()
}

fn base(family: Family, states: Vec<(f64, f64)>, columns: Vec<Column>) -> TableSpec {
    TableSpec {
        family,
        states,
        gamma: 0.8,
        eps_trunc: 0.0005,
        horizon: None,
        columns,
        eps_nu: 0.001,
        beta: 0.05,
        max_iters: 10_000_000,
        min_iters: 50,
        repetitions: 2,
        seed: 20_240_101,
    }
}

fn depths(ks: &[usize]) -> Vec<Column> {
    ks.iter().map(|&depth| Column { depth, n: 1 }).collect()
}

fn branches(ns: &[usize]) -> Vec<Column> {
    ns.iter().map(|&n| Column { depth: 2, n }).collect()
}

pub fn bernoulli_depths(ks: &[usize]) -> TableSpec {
    base(Family::Bernoulli, bernoulli_grid(), depths(ks))
}

pub fn bernoulli_branches(ns: &[usize]) -> TableSpec {
    base(Family::Bernoulli, bernoulli_grid(), branches(ns))
}

pub fn gaussian_depths(ks: &[usize]) -> TableSpec {
    base(Family::Gaussian, gaussian_grid(), depths(ks))
}

pub fn gaussian_branches(ns: &[usize]) -> TableSpec {
    base(Family::Gaussian, gaussian_grid(), branches(ns))
}

pub const TABLE_PRESETS: [&str; 4] = ["bernoulli-table1", "bernoulli-table2", "gaussian-table3", "gaussian-table4"];
pub const EXPERIMENT_PRESETS: [&str; 2] = ["random-effects-desk", "random-effects-full"];

/// Table preset by name: depth sweeps `K = 1, 2, 3` (tables 1 and 3) and
/// branch sweeps `n = 1, 3, 5` at `K = 2` (tables 2 and 4).
pub fn table_preset(name: &str) -> Result<TableSpec> {
    Ok(match name {
        "bernoulli-table1" => bernoulli_depths(&[1, 2, 3]),
        "bernoulli-table2" => bernoulli_branches(&[1, 3, 5]),
        "gaussian-table3" => gaussian_depths(&[1, 2, 3]),
        "gaussian-table4" => gaussian_branches(&[1, 3, 5]),
        _ => return Err(unknown(name, &TABLE_PRESETS)),
    })
}

pub fn experiment_preset(name: &str) -> Result<ExperimentConfig> {
    Ok(match name {
        "random-effects-desk" => ExperimentConfig::desk(),
        "random-effects-full" => ExperimentConfig::full(),
        _ => return Err(unknown(name, &EXPERIMENT_PRESETS)),
    })
}

fn unknown(name: &str, known: &[&str]) -> Error {
    Error::InvalidParameter(format!("unknown preset {name:?}; known: {}", known.join(", ")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_resolves() {
        for p in TABLE_PRESETS {
            assert!(table_preset(p).is_ok());
        }
        for p in EXPERIMENT_PRESETS {
            experiment_preset(p).unwrap().validate().unwrap();
        }
        assert!(table_preset("nope").is_err());
    }
}
