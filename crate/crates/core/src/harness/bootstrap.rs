//! Reductions with a fixed evaluation order and bootstrap intervals.

use crate::error::{invalid, Result};
use crate::rng::Stream;

/// Sum by recursive halving; the tree shape depends only on the length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    pairwise_sum(xs) / xs.len() as f64
}

/// Percentile bootstrap interval for the mean at confidence `level`.
pub fn bootstrap_mean_ci(samples: &[f64], level: f64, resamples: usize, stream: &mut Stream) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return invalid("bootstrap needs at least two samples");
    }
    if !(level > 0.0 && level < 1.0) || resamples == 0 {
        return invalid("need a level in (0, 1) and at least one resample");
    }
    let n = samples.len();
    let mut means = Vec::with_capacity(resamples);
    let mut buf = vec![0.0; n];
    for _ in 0..resamples {
        for b in buf.iter_mut() {
            *b = samples[stream.index(n)];
        }
        means.push(mean(&buf));
    }
    means.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let i = ((p * resamples as f64).floor() as usize).min(resamples - 1);
        means[i]
    };
    let tail = (1.0 - level) / 2.0;
    Ok((q(tail), q(1.0 - tail)))
}
