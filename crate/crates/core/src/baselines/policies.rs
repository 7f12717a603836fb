//! Thompson sampling and Bayes-UCB on particle posteriors.

use crate::error::{invalid, Result};
use crate::models::random_effects::ParticlePosterior;
use crate::rng::Stream;

/// An arm's posterior together with the cluster of its next pull.
#[derive(Clone, Copy, Debug)]
pub struct ArmView<'a> {
    pub posterior: &'a ParticlePosterior,
    pub cluster: usize,
}

/// Index of the largest value; ties broken uniformly at random.
pub fn argmax_uniform(values: &[f64], stream: &mut Stream) -> usize {
    let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..values.len()).filter(|&i| values[i] == best).collect();
    match ties.len() {
        0 => 0,
        1 => ties[0],
        n => ties[stream.index(n)],
    }
}

/// Smallest value whose cumulative weight reaches `level`.
pub fn weighted_quantile(samples: &[(f64, f64)], level: f64) -> f64 {
    let mut sorted: Vec<(f64, f64)> = samples.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = sorted.iter().map(|s| s.1).sum();
    let mut acc = 0.0;
    for &(v, w) in &sorted {
        acc += w;
        if acc >= level * total {
            return v;
        }
    }
    sorted.last().map(|s| s.0).unwrap_or(f64::NAN)
}

/// Quantile level `1 - 1 / (t ln(T)^6)` at decision epoch `t`.
pub fn bayes_ucb_level(t: usize, horizon: usize) -> Result<f64> {
    if t == 0 || horizon < 2 {
        return invalid("Bayes-UCB needs t >= 1 and T > 1");
    }
    Ok(1.0 - 1.0 / (t as f64 * (horizon as f64).ln().powi(6)))
}

pub fn thompson_choice(arms: &[ArmView<'_>], stream: &mut Stream) -> Result<usize> {
    if arms.is_empty() {
        return invalid("no arms");
    }
    let mut eta = Vec::with_capacity(arms.len());
    for a in arms {
        let means = a.posterior.cluster_means(a.cluster)?;
        eta.push(means[a.posterior.draw_index(stream)].0);
    }
    Ok(argmax_uniform(&eta, stream))
}

pub fn bayes_ucb_choice(arms: &[ArmView<'_>], t: usize, horizon: usize, stream: &mut Stream) -> Result<usize> {
    if arms.is_empty() {
        return invalid("no arms");
    }
    let level = bayes_ucb_level(t, horizon)?;
    let mut eta = Vec::with_capacity(arms.len());
    for a in arms {
        eta.push(weighted_quantile(&a.posterior.cluster_means(a.cluster)?, level));
    }
    Ok(argmax_uniform(&eta, stream))
}
