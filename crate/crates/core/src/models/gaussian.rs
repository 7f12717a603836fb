//! Gaussian arms with known unit observation variance and a normal prior.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::fabp::{DiscountFactor, MarkovRewardModel, TruncationConfig};
use crate::models::{horizon_for, ExpFamState};
use crate::rng::Stream;

/// Posterior-mean walk: `Ψ` accumulates observations, `κ` counts them
/// (plus the prior's weight).
#[derive(Clone, Copy, Debug, Default)]
pub struct GaussianArm;

impl GaussianArm {
    pub fn state(psi: f64, kappa: f64) -> Result<ExpFamState> {
        if !(kappa > 0.0) || !psi.is_finite() {
            return invalid(format!("Gaussian state needs κ > 0, got ({psi}, {kappa})"));
        }
        Ok(ExpFamState::new(psi, kappa))
    }
}

impl MarkovRewardModel for GaussianArm {
    type State = ExpFamState;

    #[inline]
    fn reward(&self, s: &ExpFamState) -> f64 {
        s.mean()
    }

    #[inline]
    fn step(&self, s: &ExpFamState, stream: &mut Stream) -> Result<ExpFamState> {
        let z: f64 = StandardNormal.sample(stream);
        let obs = s.mean() + z * (1.0 + 1.0 / s.kappa).sqrt();
        Ok(ExpFamState::new(s.psi + obs, s.kappa + 1.0))
    }
}

/// Half-width `L` and horizon `N` for truncation error at most `eps`.
pub fn gaussian_bounds(eps: f64, gamma: DiscountFactor, kappa: f64) -> Result<(f64, usize)> {
    if !(eps > 0.0) || !(kappa > 0.0) {
        return invalid("need eps > 0 and κ > 0");
    }
    let s2 = std::f64::consts::SQRT_2;
    let n = horizon_for(eps / (2.0 * (s2 + eps)), gamma.value());
    let l = (2.0 * (s2 + eps) / (kappa * eps)).sqrt();
    Ok((l, n))
}

/// Truncation for a Gaussian state at tolerance `eps`.
pub fn gaussian_truncation(s: &ExpFamState, eps: f64, gamma: DiscountFactor) -> Result<TruncationConfig> {
    let (l, n) = gaussian_bounds(eps, gamma, s.kappa)?;
    TruncationConfig::new(n, s.mean() - l, s.mean() + l, gamma)
}

/// Index of `(Ψ, κ)` from the index of `(0, κ)`.
pub fn gaussian_shift(psi: f64, kappa: f64, nu_zero: f64) -> f64 {
    psi / kappa + nu_zero
}

/// Upper bound on `E[γ^σ]` for the truncation above.
pub fn gaussian_escape_bound(l: f64, n: usize, gamma: DiscountFactor, kappa: f64) -> f64 {
    gamma.value().powi(n as i32) + 1.0 / (l * l * kappa)
}
