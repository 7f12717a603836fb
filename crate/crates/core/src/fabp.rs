//! Markov reward processes, reward truncation and the scaled cost process.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::Stream;

/// Discount factor strictly inside `(0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct DiscountFactor(f64);

impl DiscountFactor {
    pub fn new(gamma: f64) -> Result<Self> {
        if gamma > 0.0 && gamma < 1.0 {
            Ok(DiscountFactor(gamma))
        } else {
            invalid(format!("discount factor must lie in (0, 1), got {gamma}"))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for DiscountFactor {
    type Error = crate::Error;
    fn try_from(g: f64) -> Result<Self> {
        DiscountFactor::new(g)
    }
}

impl From<DiscountFactor> for f64 {
    fn from(g: DiscountFactor) -> f64 {
        g.0
    }
}

/// One arm of a bandit: a Markov chain on `State` with a reward map.
///
/// `step` must be a deterministic function of the state and the stream so
/// that paths can be replayed from their keys.
pub trait MarkovRewardModel: Sync {
    type State: Clone + Send + Sync;

    fn reward(&self, state: &Self::State) -> f64;

    fn step(&self, state: &Self::State, stream: &mut Stream) -> Result<Self::State>;
}

/// Models whose transitions have finitely many outcomes, usable by the exact
/// enumeration oracles.
pub trait FiniteModel: MarkovRewardModel {
    /// Successor states with their probabilities.
    fn outcomes(&self, state: &Self::State) -> Vec<(f64, Self::State)>;
}

/// Horizon, reward bounds and discount of a truncated index problem.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationConfig {
    horizon: usize,
    lower: f64,
    upper: f64,
    gamma: DiscountFactor,
}

impl TruncationConfig {
    pub fn new(horizon: usize, lower: f64, upper: f64, gamma: DiscountFactor) -> Result<Self> {
        if horizon == 0 {
            return invalid("horizon must be at least 1");
        }
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return invalid(format!("reward bounds must satisfy R_l < R_u, got [{lower}, {upper}]"));
        }
        Ok(TruncationConfig { horizon, lower, upper, gamma })
    }

    #[inline]
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    #[inline]
    pub fn lower(&self) -> f64 {
        self.lower
    }

    #[inline]
    pub fn upper(&self) -> f64 {
        self.upper
    }

    #[inline]
    pub fn gamma(&self) -> DiscountFactor {
        self.gamma
    }

    /// Scaling that maps charged partial sums into `[-1/2, 1/2]`.
    #[inline]
    pub fn c(&self) -> f64 {
        let g = self.gamma.0;
        (1.0 - g) / (2.0 * (self.upper - self.lower) * (1.0 - g.powi(self.horizon as i32)))
    }

    #[inline]
    pub fn in_bounds(&self, r: f64) -> bool {
        r >= self.lower && r <= self.upper
    }

    /// Whether `Z` values at this charge are guaranteed to lie in `[-1/2, 1/2]`.
    #[inline]
    pub(crate) fn clamps_at(&self, nu: f64) -> bool {
        self.in_bounds(nu)
    }

    pub(crate) fn gamma_powers(&self) -> Vec<f64> {
        let g = self.gamma.0;
        let mut p = Vec::with_capacity(self.horizon + 1);
        let mut x = 1.0;
        for _ in 0..=self.horizon {
            p.push(x);
            x *= g;
        }
        p
    }

    /// The ν-slopes `b_t = c (1 - γ^{t∧σ}) / (1 - γ)` of `Z_t`, indexed `t - 1`.
    pub fn slopes(&self, sigma: usize) -> Vec<f64> {
        let c = self.c();
        let g = self.gamma.0;
        (1..=self.horizon).map(|t| c * (1.0 - g.powi(t.min(sigma) as i32)) / (1.0 - g)).collect()
    }
}

/// A simulated path `s_0..s_N` with its rewards and truncation time.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePath<S> {
    pub states: Vec<S>,
    pub rewards: Vec<f64>,
    pub sigma: usize,
}

/// Index of the first reward outside the bounds, capped at the horizon.
pub(crate) fn truncation_time(rewards: &[f64], trunc: &TruncationConfig) -> usize {
    rewards.iter().take(trunc.horizon()).position(|&r| !trunc.in_bounds(r)).unwrap_or(trunc.horizon())
}

/// Simulates `N` transitions from `s0`.
pub fn simulate_path<M: MarkovRewardModel>(
    model: &M,
    s0: &M::State,
    trunc: &TruncationConfig,
    stream: &mut Stream,
) -> Result<SamplePath<M::State>> {
    let n = trunc.horizon();
    let mut states = Vec::with_capacity(n + 1);
    let mut rewards = Vec::with_capacity(n);
    states.push(s0.clone());
    for t in 0..n {
        rewards.push(model.reward(&states[t]));
        let next = model.step(&states[t], stream)?;
        states.push(next);
    }
    let sigma = truncation_time(&rewards, trunc);
    Ok(SamplePath { states, rewards, sigma })
}

#[inline]
pub(crate) fn clamp_half(z: f64) -> f64 {
    z.clamp(-0.5, 0.5)
}

/// Scaled cost process `Z_1(ν)..Z_N(ν)` of a path.
pub fn scaled_costs<S>(path: &SamplePath<S>, nu: f64, trunc: &TruncationConfig) -> Vec<f64> {
    costs_from_rewards(&path.rewards, path.sigma, nu, trunc)
}

pub(crate) fn costs_from_rewards(rewards: &[f64], sigma: usize, nu: f64, trunc: &TruncationConfig) -> Vec<f64> {
    let n = trunc.horizon();
    let c = trunc.c();
    let g = trunc.gamma().value();
    let clamp = trunc.clamps_at(nu);
    let mut out = Vec::with_capacity(n);
    let mut acc = 0.0;
    let mut w = 1.0;
    for t in 1..=n {
        if t <= sigma {
            acc += w * (nu - rewards[t - 1]);
            w *= g;
        }
        let z = c * acc;
        out.push(if clamp { clamp_half(z) } else { z });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::tabular::TabularChain;
    use crate::rng::StreamKey;

    fn trunc(n: usize, lo: f64, hi: f64, g: f64) -> TruncationConfig {
        TruncationConfig::new(n, lo, hi, DiscountFactor::new(g).unwrap()).unwrap()
    }

    #[test]
    fn discount_rejects_boundary() {
        assert!(DiscountFactor::new(0.0).is_err());
        assert!(DiscountFactor::new(1.0).is_err());
        assert!(DiscountFactor::new(f64::NAN).is_err());
        assert!(DiscountFactor::new(0.8).is_ok());
    }

    #[test]
    fn truncation_rejects_bad_bounds() {
        let g = DiscountFactor::new(0.5).unwrap();
        assert!(TruncationConfig::new(0, 0.0, 1.0, g).is_err());
        assert!(TruncationConfig::new(3, 1.0, 1.0, g).is_err());
        assert!(TruncationConfig::new(3, 0.0, 1.0, g).is_ok());
    }

    #[test]
    fn constant_chain_in_bounds() {
        let m = TabularChain::constant(0.3);
        let tr = trunc(5, 0.0, 1.0, 0.9);
        let p = simulate_path(&m, &0, &tr, &mut StreamKey::root(1).stream()).unwrap();
        assert_eq!(p.sigma, 5);
        assert_eq!(p.states.len(), 6);
        assert!(p.rewards.iter().all(|&r| r == 0.3));
    }

    #[test]
    fn constant_chain_out_of_bounds() {
        let m = TabularChain::constant(2.0);
        let tr = trunc(5, 0.0, 1.0, 0.9);
        let p = simulate_path(&m, &0, &tr, &mut StreamKey::root(1).stream()).unwrap();
        assert_eq!(p.sigma, 0);
        assert!(scaled_costs(&p, 0.4, &tr).iter().all(|&z| z == 0.0));
    }

    #[test]
    fn zero_charge_gap_gives_zero_costs() {
        let m = TabularChain::constant(0.5);
        let tr = trunc(7, 0.0, 1.0, 0.8);
        let p = simulate_path(&m, &0, &tr, &mut StreamKey::root(1).stream()).unwrap();
        assert!(scaled_costs(&p, 0.5, &tr).iter().all(|&z| z == 0.0));
    }

    #[test]
    fn extreme_charge_saturates() {
        let m = TabularChain::constant(0.0);
        let tr = trunc(12, 0.0, 1.0, 0.8);
        let p = simulate_path(&m, &0, &tr, &mut StreamKey::root(1).stream()).unwrap();
        let z = scaled_costs(&p, 1.0, &tr);
        assert!((z[11] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn slopes_match_definition() {
        let tr = trunc(4, 0.0, 1.0, 0.5);
        let b = tr.slopes(2);
        let c = tr.c();
        assert!((b[0] - c).abs() < 1e-15);
        assert!((b[1] - c * 1.5).abs() < 1e-15);
        assert_eq!(b[2], b[1]);
        assert_eq!(b[3], b[1]);
    }
}
