//! Stochastic root finding for the truncated index, with stopping rule,
//! error bounds and extrapolation in the depth `K`.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};
use crate::fabp::{DiscountFactor, MarkovRewardModel, TruncationConfig};
use crate::rng::StreamKey;
use crate::tree::{estimate_with_budget, ReplicationSchedule, DEFAULT_NODE_BUDGET};

/// Floor on `|Σ h|` for the adaptive rule.
const ADAPTIVE_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "value")]
pub enum StepKind {
    Constant(f64),
    Linear(f64),
    Adaptive,
}

/// Step-size sequence with an upper cap `M_α`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSizeRule {
    pub kind: StepKind,
    pub cap: f64,
}

impl StepSizeRule {
    pub fn new(kind: StepKind, cap: f64) -> Result<Self> {
        if !(cap > 0.0) {
            return invalid("step cap must be positive");
        }
        match kind {
            StepKind::Constant(a) | StepKind::Linear(a) if !(a > 0.0) => {
                return invalid("step parameter must be positive");
            }
            _ => {}
        }
        Ok(StepSizeRule { kind, cap })
    }

    /// Rule capped at the largest value the iterate bounds allow.
    pub fn with_max_cap(kind: StepKind, trunc: &TruncationConfig) -> Result<Self> {
        Self::new(kind, 2.0 * (trunc.upper() - trunc.lower()))
    }

    /// Step at iteration `m >= 1` given the running sum of derivatives.
    #[inline]
    pub fn alpha(&self, m: usize, h_sum: f64) -> f64 {
        let raw = match self.kind {
            StepKind::Constant(a) => a,
            StepKind::Linear(a) => a / m as f64,
            StepKind::Adaptive => 1.0 / h_sum.abs().max(ADAPTIVE_FLOOR),
        };
        raw.min(self.cap)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub trunc: TruncationConfig,
    pub schedule: ReplicationSchedule,
    pub step: StepSizeRule,
    pub nu0: f64,
    pub eps_nu: f64,
    pub beta: f64,
    pub max_iters: usize,
    pub min_iters: usize,
    /// Record every iterate in [`SolverResult::trace`].
    pub keep_trace: bool,
    pub node_budget: u128,
}

impl SolverConfig {
    /// Adaptive steps capped at `2 (R_u - R_l)`, started at `nu0`, with a
    /// 95% stopping rule of radius `eps_nu`.
    pub fn new(trunc: TruncationConfig, schedule: ReplicationSchedule, nu0: f64, eps_nu: f64) -> Result<Self> {
        let step = StepSizeRule::with_max_cap(StepKind::Adaptive, &trunc)?;
        let cfg = SolverConfig {
            trunc,
            schedule,
            step,
            nu0,
            eps_nu,
            beta: 0.05,
            max_iters: 10_000_000,
            min_iters: 50,
            keep_trace: false,
            node_budget: DEFAULT_NODE_BUDGET,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.trunc;
        if !t.in_bounds(self.nu0) {
            return invalid(format!("nu0 = {} outside [{}, {}]", self.nu0, t.lower(), t.upper()));
        }
        if !(self.eps_nu > 0.0) {
            return invalid("eps_nu must be positive");
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return invalid("beta must lie in (0, 1)");
        }
        if self.max_iters == 0 || self.min_iters == 0 {
            return invalid("iteration limits must be positive");
        }
        if !(self.step.cap > 0.0) || self.step.cap > 2.0 * (t.upper() - t.lower()) * (1.0 + 1e-12) {
            return invalid(format!("step cap {} exceeds 2 (R_u - R_l)", self.step.cap));
        }
        Ok(())
    }

    /// Normal quantile `C_{1-β}` at level `1 - β/2`.
    pub fn critical_value(&self) -> f64 {
        normal_quantile(1.0 - self.beta / 2.0)
    }
}

pub(crate) fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub nu: f64,
    pub value: f64,
    pub derivative: f64,
    pub alpha: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    MaxIters,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub nu_final: f64,
    pub iterations: usize,
    pub trace: Vec<TraceEntry>,
    pub ci_radius: f64,
    pub stopped_by: StopReason,
    /// Mean over iterations of each level's contribution to `V`.
    pub per_k_mean: Vec<f64>,
    /// Smallest and largest iterate visited, including `nu0` and `nu_final`.
    pub nu_range: (f64, f64),
    /// Iterations whose adaptive denominator hit the floor.
    pub floored_steps: usize,
}

/// Runs `ν_{m+1} = ν_m - α_m V_m(ν_m)` with an independent estimator
/// stream per iteration.
pub fn solve<M: MarkovRewardModel>(model: &M, s0: &M::State, cfg: &SolverConfig, seed: u64) -> Result<SolverResult> {
    cfg.validate()?;
    let crit = cfg.critical_value();
    let root = StreamKey::root(seed);
    let depth = cfg.schedule.depth();
    let mut nu = cfg.nu0;
    let (mut lo, mut hi) = (nu, nu);
    let (mut sum_v2, mut sum_h) = (0.0, 0.0);
    let mut per_k = vec![0.0; depth];
    let mut trace = Vec::new();
    let mut floored = 0;
    let mut radius = f64::INFINITY;
    for m in 1..=cfg.max_iters {
        let est =
            estimate_with_budget(model, s0, nu, &cfg.trunc, &cfg.schedule, root.child(m as u64), cfg.node_budget)?;
        sum_v2 += est.value * est.value;
        sum_h += est.derivative;
        for (acc, v) in per_k.iter_mut().zip(&est.per_k) {
            *acc += v;
        }
        if matches!(cfg.step.kind, StepKind::Adaptive) && sum_h.abs() < ADAPTIVE_FLOOR {
            floored += 1;
        }
        let alpha = cfg.step.alpha(m, sum_h);
        if cfg.keep_trace {
            trace.push(TraceEntry { nu, value: est.value, derivative: est.derivative, alpha });
        }
        nu -= alpha * est.value;
        lo = lo.min(nu);
        hi = hi.max(nu);
        let mf = m as f64;
        radius = crit * (sum_v2 / mf).sqrt() / (mf.sqrt() * (sum_h / mf).abs());
        if m >= cfg.min_iters && radius <= cfg.eps_nu {
            return Ok(finish(nu, m, trace, radius, StopReason::Tolerance, per_k, (lo, hi), floored));
        }
    }
    Ok(finish(nu, cfg.max_iters, trace, radius, StopReason::MaxIters, per_k, (lo, hi), floored))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    nu: f64,
    m: usize,
    trace: Vec<TraceEntry>,
    radius: f64,
    stopped_by: StopReason,
    mut per_k: Vec<f64>,
    nu_range: (f64, f64),
    floored_steps: usize,
) -> SolverResult {
    for v in &mut per_k {
        *v /= m as f64;
    }
    SolverResult {
        nu_final: nu,
        iterations: m,
        trace,
        ci_radius: radius,
        stopped_by,
        per_k_mean: per_k,
        nu_range,
        floored_steps,
    }
}

/// Upper bound `b e / (1 - e)` on the truncation error of the index, where
/// `e` bounds `E[γ^σ]` and `b` bounds the positive part of the index at `σ`.
pub fn trunc_error_upper(e_gamma_sigma: f64, nu_plus_bound: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&e_gamma_sigma) {
        return invalid(format!("E[γ^σ] bound must lie in [0, 1), got {e_gamma_sigma}"));
    }
    if !(nu_plus_bound >= 0.0) {
        return invalid("index bound must be nonnegative");
    }
    Ok(nu_plus_bound * e_gamma_sigma / (1.0 - e_gamma_sigma))
}

/// Finite-time interval `(ν - ξ₂ - 2B/c, ν + ξ₂ + 2B/c + trunc)`.
pub fn finite_time_ci(nu_m: f64, xi2: f64, b: f64, c: f64, trunc_upper: f64) -> Result<(f64, f64)> {
    if xi2 < 0.0 || b < 0.0 || trunc_upper < 0.0 || !(c > 0.0) {
        return invalid("finite-time interval needs nonnegative inputs and c > 0");
    }
    let r = xi2 + 2.0 * b / c;
    Ok((nu_m - r, nu_m + r + trunc_upper))
}

/// One step of the mean-squared-error recursion.
pub fn mse_recursion_step(prev: f64, alpha: f64, c: f64, v_eps_sq: f64) -> f64 {
    (1.0 - c * alpha).powi(2) * prev + alpha * alpha * v_eps_sq
}

/// Analytical mean-squared-error bound at iteration `m`.
pub fn mse_recursion_bound(b0_sq: f64, step: &StepSizeRule, v_eps_sq: f64, c: f64, m: usize) -> Result<f64> {
    if !(c > 0.0) || b0_sq < 0.0 || v_eps_sq < 0.0 {
        return invalid("need c > 0 and nonnegative variances");
    }
    match step.kind {
        StepKind::Constant(a) => {
            if c * a >= 1.0 {
                return invalid("constant step needs c α < 1");
            }
            Ok(b0_sq * (1.0 - c * a).powi(2 * m as i32) + v_eps_sq * a / c)
        }
        StepKind::Linear(a) => {
            if c * a <= 1.0 {
                return invalid("linear step needs A > 1/c");
            }
            if m == 0 {
                return invalid("iteration must be positive");
            }
            Ok(a * a * v_eps_sq / (m as f64 * (c * a - 1.0)))
        }
        StepKind::Adaptive => invalid("no closed-form bound for the adaptive rule"),
    }
}

/// Intercept `a` of the least-squares line `ν_K = a + b / (K + 1)`.
pub fn extrapolate_k(values: &[(usize, f64)]) -> Result<f64> {
    if values.len() < 2 {
        return invalid("need at least two depths");
    }
    let mut ks: Vec<usize> = values.iter().map(|v| v.0).collect();
    ks.sort_unstable();
    if ks.windows(2).any(|w| w[0] == w[1]) {
        return invalid("duplicate depth");
    }
    let n = values.len() as f64;
    let xs: Vec<f64> = values.iter().map(|&(k, _)| 1.0 / (k as f64 + 1.0)).collect();
    let xm = xs.iter().sum::<f64>() / n;
    let ym = values.iter().map(|v| v.1).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, &(_, y)) in xs.iter().zip(values) {
        sxy += (x - xm) * (y - ym);
        sxx += (x - xm) * (x - xm);
    }
    Ok(ym - sxy / sxx * xm)
}

/// Per-arm accuracy and failure probability that make the index policy
/// `ε`-optimal for `num_arms` arms with `D(s) <= d_bound`.
pub fn epsilon_optimal_params(eps: f64, gamma: DiscountFactor, num_arms: usize, d_bound: f64) -> Result<(f64, f64)> {
    if !(eps > 0.0) || !(d_bound > 0.0) || num_arms == 0 {
        return Err(Error::InvalidParameter("need ε > 0, D > 0 and at least one arm".into()));
    }
    let g = gamma.value();
    let acc = (1.0 - g) * (1.0 - g) * eps / 4.0;
    Ok((acc, acc / (num_arms as f64 * d_bound)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::tabular::TabularChain;

    fn unit_trunc(n: usize) -> TruncationConfig {
        TruncationConfig::new(n, 0.0, 1.0, DiscountFactor::new(0.8).unwrap()).unwrap()
    }

    #[test]
    fn step_rules_respect_cap() {
        let r = StepSizeRule::new(StepKind::Adaptive, 0.5).unwrap();
        assert_eq!(r.alpha(1, 0.0), 0.5);
        assert_eq!(r.alpha(1, 4.0), 0.25);
        let l = StepSizeRule::new(StepKind::Linear(3.0), 1.0).unwrap();
        assert_eq!(l.alpha(1, 0.0), 1.0);
        assert_eq!(l.alpha(6, 0.0), 0.5);
        assert!(StepSizeRule::new(StepKind::Constant(-1.0), 1.0).is_err());
    }

    #[test]
    fn rejects_oversized_cap() {
        let tr = unit_trunc(5);
        let mut cfg = SolverConfig::new(tr, ReplicationSchedule::uniform(1, 1).unwrap(), 0.5, 0.01).unwrap();
        cfg.step.cap = 2.5;
        assert!(cfg.validate().is_err());
        assert!(SolverConfig::new(tr, ReplicationSchedule::uniform(1, 1).unwrap(), 1.5, 0.01).is_err());
    }

    #[test]
    fn constant_arm_index_is_its_reward() {
        let tr = unit_trunc(10);
        let cfg = SolverConfig::new(tr, ReplicationSchedule::uniform(2, 1).unwrap(), 0.9, 1e-3).unwrap();
        let res = solve(&TabularChain::constant(0.3), &0, &cfg, 1).unwrap();
        assert!((res.nu_final - 0.3).abs() < 1e-3, "{}", res.nu_final);
        assert_eq!(res.stopped_by, StopReason::Tolerance);
    }

    #[test]
    fn truncation_bound_values() {
        assert_eq!(trunc_error_upper(0.0, 7.0).unwrap(), 0.0);
        assert!(trunc_error_upper(1.0, 1.0).is_err());
        let e = 0.8f64.powi(35);
        let b = trunc_error_upper(e, 1.0).unwrap();
        assert!((b - e / (1.0 - e)).abs() < 1e-18);
        assert!(b <= 0.0005);
    }

    #[test]
    fn finite_ci_shape() {
        assert_eq!(finite_time_ci(0.5, 0.0, 0.0, 0.1, 0.0).unwrap(), (0.5, 0.5));
        let (lo, hi) = finite_time_ci(0.5, 0.001, 0.0001, 0.106, 0.0005).unwrap();
        assert!((0.5 - lo - 0.001 - 0.0001 * 2.0 / 0.106).abs() < 1e-15);
        assert!((hi - lo - (0.002 + 4.0 * 0.0001 / 0.106 + 0.0005)).abs() < 1e-15);
    }

    #[test]
    fn mse_bounds() {
        let c = 0.1;
        let lin = StepSizeRule::new(StepKind::Linear(2.0 / c), 100.0).unwrap();
        let v = mse_recursion_bound(3.0, &lin, 1.0, c, 100).unwrap();
        assert!((v - 4.0 / (c * c * 100.0)).abs() < 1e-9);
        let con = StepSizeRule::new(StepKind::Constant(0.5), 100.0).unwrap();
        assert_eq!(mse_recursion_bound(0.0, &con, 0.0, c, 10).unwrap(), 0.0);
        let far = mse_recursion_bound(2.0, &con, 0.7, c, 100_000).unwrap();
        assert!((far - 0.7 * 0.5 / c).abs() < 1e-12);
        assert!(
            mse_recursion_bound(1.0, &StepSizeRule::new(StepKind::Constant(20.0), 100.0).unwrap(), 1.0, c, 3).is_err()
        );
    }

    #[test]
    fn extrapolation() {
        let (a, b) = (0.3, 0.2);
        let pts: Vec<_> = (1..=3).map(|k| (k, a + b / (k as f64 + 1.0))).collect();
        assert!((extrapolate_k(&pts).unwrap() - a).abs() < 1e-12);
        assert!(extrapolate_k(&pts[..1]).is_err());
        assert!(extrapolate_k(&[(1, 0.1), (1, 0.2)]).is_err());
    }

    #[test]
    fn epsilon_params() {
        let g = DiscountFactor::new(0.8).unwrap();
        let (acc, conf) = epsilon_optimal_params(0.4, g, 3, 2.0).unwrap();
        assert!((acc - 0.004).abs() < 1e-15);
        assert!((conf - 0.004 / 6.0).abs() < 1e-15);
        let (a1, c1) = epsilon_optimal_params(0.4, g, 1, 1.0).unwrap();
        assert_eq!(a1, c1);
    }
}
