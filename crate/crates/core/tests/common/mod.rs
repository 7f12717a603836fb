#![allow(dead_code)]

use gittins_core::models::random_effects::{
    gibbs_step, prior_draw, re_reward, smc_update, ClusterStats, ParticlePosterior, RePriors,
};
use gittins_core::models::tabular::TabularChain;
use gittins_core::{DiscountFactor, TruncationConfig};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use gittins_core::{Stream, StreamKey};

/// A random finite chain with rewards in `[0, 1]`, at most `max_out`
/// outcomes per state, together with a truncation on `[0, 1]` and a charge.
pub struct RandomChain {
    pub chain: TabularChain,
    pub trunc: TruncationConfig,
    pub nu: f64,
}

pub fn random_chain(rng: &mut Stream, max_states: usize, max_out: usize, max_horizon: usize) -> RandomChain {
    let states = rng.random_range(2.min(max_states)..=max_states);
    let rewards: Vec<f64> = (0..states).map(|_| rng.random::<f64>()).collect();
    let transitions = (0..states)
        .map(|_| {
            let k = rng.random_range(1..=max_out.min(states));
            let w: Vec<f64> = (0..k).map(|_| 0.05 + rng.random::<f64>()).collect();
            let total: f64 = w.iter().sum();
            let to = rand::seq::index::sample(rng, states, k);
            let mut row: Vec<(f64, usize)> = w.iter().zip(to.iter()).map(|(x, j)| (x / total, j)).collect();
            let head: f64 = row[1..].iter().map(|r| r.0).sum();
            row[0].0 = 1.0 - head;
            row
        })
        .collect();
    let chain = TabularChain::new(rewards, transitions).unwrap();
    let n = rng.random_range(1..=max_horizon);
    let g = DiscountFactor::new(rng.random_range(0.3..0.95)).unwrap();
    let trunc = TruncationConfig::new(n, 0.0, 1.0, g).unwrap();
    RandomChain { chain, trunc, nu: rng.random::<f64>() }
}

/// Observations and cluster labels drawn from the prior model.
pub fn re_dataset(priors: &RePriors, d: usize, n: usize, key: StreamKey) -> (Vec<f64>, Vec<usize>) {
    let mut s = key.stream();
    let truth = prior_draw(priors, d, &mut s).unwrap();
    let cs: Vec<usize> = (0..n).map(|_| s.index(d)).collect();
    let ys = cs
        .iter()
        .map(|&c| {
            let z: f64 = StandardNormal.sample(&mut s);
            truth.mean(c) + truth.v1.sqrt() * z
        })
        .collect();
    (ys, cs)
}

/// Posterior means of `θ + u_c` per cluster from a long Gibbs run, with
/// batch-means standard errors.
pub fn batch_gibbs(
    ys: &[f64],
    cs: &[usize],
    d: usize,
    priors: &RePriors,
    burn: usize,
    sweeps: usize,
    key: StreamKey,
) -> (Vec<f64>, Vec<f64>) {
    let data = ClusterStats::from_data(ys, cs, d).unwrap();
    let mut s = key.stream();
    let mut p = prior_draw(priors, d, &mut s).unwrap();
    for _ in 0..burn {
        p = gibbs_step(&p, &data, priors, &mut s).unwrap();
    }
    let batches = 50;
    let per = sweeps / batches;
    let mut means = vec![vec![0.0; batches]; d];
    for b in 0..batches {
        for _ in 0..per {
            p = gibbs_step(&p, &data, priors, &mut s).unwrap();
            for c in 0..d {
                means[c][b] += p.mean(c) / per as f64;
            }
        }
    }
    let mut mu = Vec::new();
    let mut se = Vec::new();
    for m in &means {
        let (a, v) = mean_var(m);
        mu.push(a);
        se.push((v / batches as f64).sqrt());
    }
    (mu, se)
}

/// Per-cluster posterior means from independent sequential runs, with
/// standard errors across runs.
pub fn smc_means(
    ys: &[f64],
    cs: &[usize],
    d: usize,
    priors: &RePriors,
    particles: usize,
    runs: usize,
    key: StreamKey,
) -> (Vec<f64>, Vec<f64>) {
    let mut per_c = vec![Vec::with_capacity(runs); d];
    for r in 0..runs {
        let k = key.child(r as u64);
        let mut post = ParticlePosterior::from_prior(priors, d, particles, &mut k.child(0).stream()).unwrap();
        for (i, (&y, &c)) in ys.iter().zip(cs).enumerate() {
            post = smc_update(&post, y, c, priors, 5, &mut k.child(1).child(i as u64).stream()).unwrap();
        }
        for c in 0..d {
            per_c[c].push(re_reward(&post, c).unwrap());
        }
    }
    per_c
        .iter()
        .map(|xs| {
            let (m, v) = mean_var(xs);
            (m, (v / xs.len() as f64).sqrt())
        })
        .unzip()
}

pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Root of an increasing function on `[lo, hi]` by bisection.
pub fn bisect_root(mut lo: f64, mut hi: f64, tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}
pub mod reference;
