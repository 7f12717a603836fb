//! Browser bindings: Bernoulli calibration grids, solver traces and
//! Gaussian index curves, each returned as a JSON string.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use gittins_core::baselines::calibration::{calibration_bernoulli, calibration_gaussian, CalibrationGrid};
use gittins_core::models::bernoulli::{bernoulli_horizon, bernoulli_truncation_with_horizon, BernoulliArm};
use gittins_core::models::gaussian::{gaussian_bounds, GaussianArm};
use gittins_core::{solve, DiscountFactor, ReplicationSchedule, SolverConfig, TruncationConfig};

const EPS_TRUNC: f64 = 0.0005;
const MAX_TRACE_POINTS: usize = 2000;

fn err(e: gittins_core::Error) -> String {
    e.to_string()
}

#[derive(Serialize)]
struct GridCell {
    psi: f64,
    kappa: f64,
    index: f64,
}

/// Exact indices for `Ψ = 1..max_psi`, `κ - Ψ = 1..max_failures`.
pub fn bernoulli_grid_json(gamma: f64, max_psi: u32, max_failures: u32) -> Result<String, String> {
    if max_psi == 0 || max_failures == 0 || max_psi * max_failures > 400 {
        return Err("grid must have between 1 and 400 cells".into());
    }
    let g = DiscountFactor::new(gamma).map_err(err)?;
    let n = bernoulli_horizon(EPS_TRUNC, g).map_err(err)?;
    let grid = CalibrationGrid::bernoulli();
    let mut cells = Vec::new();
    for p in 1..=max_psi {
        for f in 1..=max_failures {
            let (psi, kappa) = (p as f64, (p + f) as f64);
            cells.push(GridCell { psi, kappa, index: calibration_bernoulli(psi, kappa, g, n, &grid).map_err(err)? });
        }
    }
    Ok(serde_json::to_string(&cells).expect("cells serialise"))
}

#[derive(Serialize)]
struct Trace {
    iterations: usize,
    nu: Vec<(usize, f64)>,
    final_nu: f64,
    ci_radius: f64,
    calibration: f64,
}

/// Iterates of one Bernoulli solve, thinned to at most 2000 points.
pub fn sbgia_trace_json(
    psi: f64,
    kappa: f64,
    gamma: f64,
    depth: usize,
    eps_nu: f64,
    seed: u64,
) -> Result<String, String> {
    if !(1..=3).contains(&depth) {
        return Err("depth must be 1, 2 or 3 in the browser".into());
    }
    let g = DiscountFactor::new(gamma).map_err(err)?;
    let s = BernoulliArm::state(psi, kappa).map_err(err)?;
    let n = bernoulli_horizon(EPS_TRUNC, g).map_err(err)?;
    let trunc = bernoulli_truncation_with_horizon(&s, n, g).map_err(err)?;
    let mut cfg = SolverConfig::new(trunc, ReplicationSchedule::uniform(depth, 1).map_err(err)?, s.mean(), eps_nu)
        .map_err(err)?;
    cfg.keep_trace = true;
    cfg.max_iters = 200_000;
    let res = solve(&BernoulliArm, &s, &cfg, seed).map_err(err)?;
    let stride = res.trace.len().div_ceil(MAX_TRACE_POINTS).max(1);
    let mut nu: Vec<(usize, f64)> = res.trace.iter().enumerate().step_by(stride).map(|(i, t)| (i, t.nu)).collect();
    nu.push((res.iterations, res.nu_final));
    let calibration = calibration_bernoulli(psi, kappa, g, n, &CalibrationGrid::bernoulli()).map_err(err)?;
    let t = Trace { iterations: res.iterations, nu, final_nu: res.nu_final, ci_radius: res.ci_radius, calibration };
    Ok(serde_json::to_string(&t).expect("trace serialises"))
}

#[derive(Serialize)]
struct CurvePoint {
    kappa: f64,
    calibration: f64,
    sbgia: Option<f64>,
}

/// Index of the standardised Gaussian state `(0, κ)` for each `κ`, with a
/// depth-one estimate when `eps_nu` is positive.
pub fn gaussian_curve_json(gamma: f64, kappas: &[f64], eps_nu: f64, seed: u64) -> Result<String, String> {
    if kappas.is_empty() || kappas.len() > 60 {
        return Err("give between 1 and 60 values of kappa".into());
    }
    let g = DiscountFactor::new(gamma).map_err(err)?;
    let (_, n) = gaussian_bounds(EPS_TRUNC, g, 1.0).map_err(err)?;
    let mut out = Vec::new();
    for &kappa in kappas {
        let s = GaussianArm::state(0.0, kappa).map_err(err)?;
        let calibration = calibration_gaussian(kappa, g, n, &CalibrationGrid::gaussian()).map_err(err)?;
        let sbgia = if eps_nu > 0.0 {
            let (l, _) = gaussian_bounds(EPS_TRUNC, g, kappa).map_err(err)?;
            let trunc = TruncationConfig::new(n, -l, l, g).map_err(err)?;
            let mut cfg =
                SolverConfig::new(trunc, ReplicationSchedule::uniform(1, 1).map_err(err)?, 0.0, eps_nu).map_err(err)?;
            cfg.max_iters = 200_000;
            Some(solve(&GaussianArm, &s, &cfg, seed).map_err(err)?.nu_final)
        } else {
            None
        };
        out.push(CurvePoint { kappa, calibration, sbgia });
    }
    Ok(serde_json::to_string(&out).expect("curve serialises"))
}

#[wasm_bindgen]
pub fn bernoulli_grid(gamma: f64, max_psi: u32, max_failures: u32) -> Result<String, JsValue> {
    bernoulli_grid_json(gamma, max_psi, max_failures).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn sbgia_trace(psi: f64, kappa: f64, gamma: f64, depth: usize, eps_nu: f64, seed: u64) -> Result<String, JsValue> {
    sbgia_trace_json(psi, kappa, gamma, depth, eps_nu, seed).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn gaussian_curve(gamma: f64, kappas: Vec<f64>, eps_nu: f64, seed: u64) -> Result<String, JsValue> {
    gaussian_curve_json(gamma, &kappas, eps_nu, seed).map_err(|e| JsValue::from_str(&e))
}
