//! Bernoulli arms with a Beta posterior.

use crate::error::{invalid, Result};
use crate::fabp::{DiscountFactor, FiniteModel, MarkovRewardModel, TruncationConfig};
use crate::models::{horizon_for, ExpFamState};
use crate::rng::Stream;

/// Beta(Ψ, κ − Ψ) posterior chain: each pull succeeds with the posterior mean.
#[derive(Clone, Copy, Debug, Default)]
pub struct BernoulliArm;

impl BernoulliArm {
    pub fn state(psi: f64, kappa: f64) -> Result<ExpFamState> {
        if !(psi > 0.0 && psi < kappa) {
            return invalid(format!("Bernoulli state needs 0 < Ψ < κ, got ({psi}, {kappa})"));
        }
        Ok(ExpFamState::new(psi, kappa))
    }
}

impl MarkovRewardModel for BernoulliArm {
    type State = ExpFamState;

    #[inline]
    fn reward(&self, s: &ExpFamState) -> f64 {
        s.mean()
    }

    #[inline]
    fn step(&self, s: &ExpFamState, stream: &mut Stream) -> Result<ExpFamState> {
        let success = stream.uniform() * s.kappa < s.psi;
        Ok(ExpFamState::new(s.psi + if success { 1.0 } else { 0.0 }, s.kappa + 1.0))
    }
}

impl FiniteModel for BernoulliArm {
    fn outcomes(&self, s: &ExpFamState) -> Vec<(f64, ExpFamState)> {
        let p = s.mean();
        vec![(p, ExpFamState::new(s.psi + 1.0, s.kappa + 1.0)), (1.0 - p, ExpFamState::new(s.psi, s.kappa + 1.0))]
    }
}

/// Range of posterior means reachable within `n` pulls.
pub fn bernoulli_bounds(s: &ExpFamState, n: usize) -> (f64, f64) {
    let k = s.kappa + n as f64;
    (s.psi / k, (s.psi + n as f64) / k)
}

/// Smallest horizon with truncation error at most `eps`.
pub fn bernoulli_horizon(eps: f64, gamma: DiscountFactor) -> Result<usize> {
    if !(eps > 0.0) {
        return invalid("truncation tolerance must be positive");
    }
    Ok(horizon_for(eps / (1.0 + eps), gamma.value()))
}

/// Truncation for a Bernoulli state at tolerance `eps`.
pub fn bernoulli_truncation(s: &ExpFamState, eps: f64, gamma: DiscountFactor) -> Result<TruncationConfig> {
    let n = bernoulli_horizon(eps, gamma)?;
    bernoulli_truncation_with_horizon(s, n, gamma)
}

pub fn bernoulli_truncation_with_horizon(s: &ExpFamState, n: usize, gamma: DiscountFactor) -> Result<TruncationConfig> {
    let (lo, hi) = bernoulli_bounds(s, n);
    TruncationConfig::new(n, lo, hi, gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fabp::{scaled_costs, SamplePath};
    use crate::rng::StreamKey;

    #[test]
    fn conjugate_update() {
        let s = BernoulliArm::state(1.0, 2.0).unwrap();
        let out = BernoulliArm.outcomes(&s);
        assert_eq!(out[0], (0.5, ExpFamState::new(2.0, 3.0)));
        assert_eq!(out[1], (0.5, ExpFamState::new(1.0, 3.0)));
        assert_eq!(BernoulliArm.reward(&ExpFamState::new(3.0, 4.0)), 0.75);
        assert!(BernoulliArm::state(0.0, 2.0).is_err());
        assert!(BernoulliArm::state(2.0, 2.0).is_err());
    }

    #[test]
    fn step_increments_kappa() {
        let s = ExpFamState::new(1.0, 2.0);
        let mut st = StreamKey::root(4).stream();
        for _ in 0..100 {
            let n = BernoulliArm.step(&s, &mut st).unwrap();
            assert_eq!(n.kappa, 3.0);
            assert!(n.psi == 1.0 || n.psi == 2.0);
        }
    }

    #[test]
    fn horizon_and_bounds() {
        let g = DiscountFactor::new(0.8).unwrap();
        assert_eq!(bernoulli_horizon(0.0005, g).unwrap(), 35);
        assert_eq!(bernoulli_horizon(1e300, g).unwrap(), 1);
        let (lo, hi) = bernoulli_bounds(&ExpFamState::new(1.0, 2.0), 35);
        assert!((lo - 1.0 / 37.0).abs() < 1e-15);
        assert!((hi - 36.0 / 37.0).abs() < 1e-15);
        assert!((hi - lo - 0.946).abs() < 5e-4);
    }

    #[test]
    fn all_failure_path_costs() {
        let g = DiscountFactor::new(0.8).unwrap();
        let s = ExpFamState::new(1.0, 2.0);
        let tr = bernoulli_truncation_with_horizon(&s, 35, g).unwrap();
        let states: Vec<_> = (0..=35).map(|t| ExpFamState::new(1.0, 2.0 + t as f64)).collect();
        let rewards: Vec<f64> = states[..35].iter().map(|s| s.mean()).collect();
        let path = SamplePath { states, rewards, sigma: 35 };
        let z = scaled_costs(&path, 0.5, &tr);
        let c = 0.2 / (2.0 * (35.0 / 37.0) * (1.0 - 0.8f64.powi(35)));
        assert_eq!(z[0], 0.0);
        assert!((z[1] - c * 0.8 * (0.5 - 1.0 / 3.0)).abs() < 1e-15);
    }
}
