//! Concrete arm models.

pub mod bernoulli;
pub mod gaussian;
pub mod random_effects;
pub mod tabular;

use serde::{Deserialize, Serialize};

/// Sufficient statistic `Ψ` and effective sample size `κ` of a conjugate
/// posterior with a scalar statistic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpFamState {
    pub psi: f64,
    pub kappa: f64,
}

impl ExpFamState {
    pub fn new(psi: f64, kappa: f64) -> Self {
        ExpFamState { psi, kappa }
    }

    #[inline]
    pub fn mean(&self) -> f64 {
        self.psi / self.kappa
    }
}

/// Smallest `N >= 1` with `γ^N <= target`.
pub(crate) fn horizon_for(target: f64, gamma: f64) -> usize {
    if target >= 1.0 {
        return 1;
    }
    let raw = target.ln() / gamma.ln();
    // Guard against `raw` landing a hair above an integer through rounding.
    let mut n = (raw - 1e-9).ceil().max(1.0) as usize;
    while gamma.powi(n as i32) > target {
        n += 1;
    }
    n
}
