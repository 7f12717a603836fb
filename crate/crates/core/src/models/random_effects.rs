//! Gaussian random-effects arms with a weighted-particle posterior.
//!
//! Observations of an arm follow `y = θ + u_c + ε` with `ε ~ N(0, v1)`,
//! cluster effects `u_i ~ N(0, v2)` for `i < d`, and priors
//! `θ ~ N(θ0, σ0²)`, `v1 ~ IG(α0, β0)`, `v2 ~ IG(α1, β1)`.

use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fabp::{DiscountFactor, MarkovRewardModel, TruncationConfig};
use crate::rng::Stream;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RePriors {
    pub theta0: f64,
    pub sigma0_sq: f64,
    pub alpha0: f64,
    pub beta0: f64,
    pub alpha1: f64,
    pub beta1: f64,
}

impl Default for RePriors {
    fn default() -> Self {
        RePriors { theta0: 0.0, sigma0_sq: 1.0, alpha0: 13.0, beta0: 12.0, alpha1: 6.0, beta1: 10.0 }
    }
}

impl RePriors {
    pub fn validate(&self) -> Result<()> {
        let pos = [self.sigma0_sq, self.alpha0, self.beta0, self.alpha1, self.beta1];
        if !self.theta0.is_finite() || pos.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return invalid("prior variances and inverse-gamma parameters must be positive");
        }
        Ok(())
    }
}

/// One parameter draw `(θ, u, v1, v2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub theta: f64,
    pub u: Vec<f64>,
    pub v1: f64,
    pub v2: f64,
}

impl Particle {
    /// Mean outcome in cluster `c`.
    #[inline]
    pub fn mean(&self, c: usize) -> f64 {
        self.theta + self.u[c]
    }
}

/// Per-cluster count, sum and sum of squares of the observed data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats {
    pub count: Vec<f64>,
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
}

impl ClusterStats {
    pub fn empty(d: usize) -> Self {
        ClusterStats { count: vec![0.0; d], sum: vec![0.0; d], sum_sq: vec![0.0; d] }
    }

    pub fn from_data(data: &[f64], clusters: &[usize], d: usize) -> Result<Self> {
        if data.len() != clusters.len() {
            return invalid("one cluster per observation");
        }
        let mut s = Self::empty(d);
        for (&y, &c) in data.iter().zip(clusters) {
            s.push(y, c)?;
        }
        Ok(s)
    }

    pub fn clusters(&self) -> usize {
        self.count.len()
    }

    pub fn push(&mut self, y: f64, c: usize) -> Result<()> {
        check_cluster(c, self.clusters())?;
        self.count[c] += 1.0;
        self.sum[c] += y;
        self.sum_sq[c] += y * y;
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.count.iter().sum()
    }
}

fn check_cluster(c: usize, d: usize) -> Result<()> {
    if c >= d {
        return invalid(format!("cluster {c} out of range for {d} clusters"));
    }
    Ok(())
}

fn normal(stream: &mut Stream, mean: f64, var: f64) -> f64 {
    let z: f64 = StandardNormal.sample(stream);
    mean + z * var.sqrt()
}

fn inv_gamma(stream: &mut Stream, shape: f64, rate: f64) -> Result<f64> {
    if !(shape > 0.0) || !(rate > 0.0) {
        return Err(Error::Degenerate(format!("inverse-gamma with shape {shape}, rate {rate}")));
    }
    let g = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::Degenerate(e.to_string()))?;
    let x: f64 = g.sample(stream);
    if !(x > 0.0) {
        return Err(Error::Degenerate("inverse-gamma draw underflowed".into()));
    }
    Ok(1.0 / x)
}

/// Draw from the prior.
pub fn prior_draw(priors: &RePriors, d: usize, stream: &mut Stream) -> Result<Particle> {
    let theta = normal(stream, priors.theta0, priors.sigma0_sq);
    let v1 = inv_gamma(stream, priors.alpha0, priors.beta0)?;
    let v2 = inv_gamma(stream, priors.alpha1, priors.beta1)?;
    let u = (0..d).map(|_| normal(stream, 0.0, v2)).collect();
    Ok(Particle { theta, u, v1, v2 })
}

/// One systematic-scan Gibbs sweep over `θ`, `u`, `v1`, `v2`.
pub fn gibbs_step(p: &Particle, data: &ClusterStats, priors: &RePriors, stream: &mut Stream) -> Result<Particle> {
    let d = data.clusters();
    if p.u.len() != d {
        return invalid("particle and data disagree on the number of clusters");
    }
    let mut q = p.clone();
    let n = data.total();

    let prec = 1.0 / priors.sigma0_sq + n / q.v1;
    let resid: f64 = (0..d).map(|i| data.sum[i] - data.count[i] * q.u[i]).sum();
    q.theta = normal(stream, (priors.theta0 / priors.sigma0_sq + resid / q.v1) / prec, 1.0 / prec);

    for i in 0..d {
        let prec = 1.0 / q.v2 + data.count[i] / q.v1;
        let mean = (data.sum[i] - data.count[i] * q.theta) / q.v1 / prec;
        q.u[i] = normal(stream, mean, 1.0 / prec);
    }

    let mut sse = 0.0;
    for i in 0..d {
        let m = q.theta + q.u[i];
        sse += data.sum_sq[i] - 2.0 * m * data.sum[i] + data.count[i] * m * m;
    }
    q.v1 = inv_gamma(stream, priors.alpha0 + n / 2.0, priors.beta0 + 0.5 * sse.max(0.0))?;

    let ss: f64 = q.u.iter().map(|x| x * x).sum();
    q.v2 = inv_gamma(stream, priors.alpha1 + d as f64 / 2.0, priors.beta1 + 0.5 * ss)?;
    Ok(q)
}

/// Weighted particle approximation of one arm's posterior.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticlePosterior {
    pub particles: Vec<Particle>,
    pub weights: Vec<f64>,
    pub data: ClusterStats,
}

impl ParticlePosterior {
    /// `count` equally weighted prior draws.
    pub fn from_prior(priors: &RePriors, d: usize, count: usize, stream: &mut Stream) -> Result<Self> {
        priors.validate()?;
        if count == 0 || d == 0 {
            return invalid("need at least one particle and one cluster");
        }
        let particles = (0..count).map(|_| prior_draw(priors, d, stream)).collect::<Result<Vec<_>>>()?;
        Ok(ParticlePosterior { particles, weights: vec![1.0 / count as f64; count], data: ClusterStats::empty(d) })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn clusters(&self) -> usize {
        self.data.clusters()
    }

    pub fn ess(&self) -> f64 {
        1.0 / self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Index drawn with probability proportional to weight.
    pub fn draw_index(&self, stream: &mut Stream) -> usize {
        let u: f64 = stream.uniform();
        let mut acc = 0.0;
        for (i, &w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        self.weights.iter().rposition(|&w| w > 0.0).unwrap_or(self.len() - 1)
    }

    /// `(θ_i + u_{i,c}, w_i)` pairs.
    pub fn cluster_means(&self, c: usize) -> Result<Vec<(f64, f64)>> {
        check_cluster(c, self.clusters())?;
        Ok(self.particles.iter().zip(&self.weights).map(|(p, &w)| (p.mean(c), w)).collect())
    }
}

/// Posterior mean outcome in cluster `c`.
pub fn re_reward(post: &ParticlePosterior, c: usize) -> Result<f64> {
    check_cluster(c, post.clusters())?;
    Ok(post.particles.iter().zip(&post.weights).map(|(p, w)| w * p.mean(c)).sum())
}

/// Standard deviation of the posterior predictive outcome in cluster `c`.
pub fn re_predictive_sd(post: &ParticlePosterior, c: usize) -> Result<f64> {
    let m = re_reward(post, c)?;
    let second: f64 = post.particles.iter().zip(&post.weights).map(|(p, w)| w * (p.v1 + p.mean(c).powi(2))).sum();
    Ok((second - m * m).max(0.0).sqrt())
}

/// Outcome drawn from the posterior predictive in cluster `c`.
pub fn re_predictive_sample(post: &ParticlePosterior, c: usize, stream: &mut Stream) -> Result<f64> {
    check_cluster(c, post.clusters())?;
    let p = &post.particles[post.draw_index(stream)];
    Ok(normal(stream, p.mean(c), p.v1))
}

/// `d3` particles drawn by weight, equally weighted.
pub fn subsample(post: &ParticlePosterior, d3: usize, stream: &mut Stream) -> Result<ParticlePosterior> {
    if d3 == 0 {
        return invalid("subsample size must be positive");
    }
    let particles = (0..d3).map(|_| post.particles[post.draw_index(stream)].clone()).collect();
    Ok(ParticlePosterior { particles, weights: vec![1.0 / d3 as f64; d3], data: post.data.clone() })
}

fn systematic_resample(post: &mut ParticlePosterior, stream: &mut Stream) {
    let n = post.len();
    let step = 1.0 / n as f64;
    let mut u = stream.uniform() * step;
    let mut out = Vec::with_capacity(n);
    let mut acc = post.weights[0];
    let mut i = 0;
    for _ in 0..n {
        while u >= acc && i + 1 < n {
            i += 1;
            acc += post.weights[i];
        }
        out.push(post.particles[i].clone());
        u += step;
    }
    post.particles = out;
    post.weights = vec![step; n];
}

/// Reweight by the likelihood of `y` in cluster `c`, resample when the
/// effective sample size drops below half the particle count, then move
/// every particle with `sweeps` Gibbs sweeps on the accumulated data.
pub fn smc_update(
    post: &ParticlePosterior,
    y: f64,
    c: usize,
    priors: &RePriors,
    sweeps: usize,
    stream: &mut Stream,
) -> Result<ParticlePosterior> {
    check_cluster(c, post.clusters())?;
    let mut next = post.clone();
    reweight(&mut next, y, c)?;
    next.data.push(y, c)?;
    if next.ess() < next.len() as f64 / 2.0 {
        systematic_resample(&mut next, stream);
    }
    for p in &mut next.particles {
        for _ in 0..sweeps {
            *p = gibbs_step(p, &next.data, priors, stream)?;
        }
    }
    Ok(next)
}

/// Multiplies weights by the Gaussian likelihood of `y` and renormalises.
pub fn reweight(post: &mut ParticlePosterior, y: f64, c: usize) -> Result<()> {
    let logs: Vec<f64> = post
        .particles
        .iter()
        .zip(&post.weights)
        .map(|(p, &w)| {
            let r = y - p.mean(c);
            w.ln() - 0.5 * p.v1.ln() - 0.5 * r * r / p.v1
        })
        .collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::Degenerate("all particle weights vanished".into()));
    }
    let mut total = 0.0;
    for (w, l) in post.weights.iter_mut().zip(&logs) {
        *w = (l - top).exp();
        total += *w;
    }
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Degenerate("all particle weights vanished".into()));
    }
    for w in &mut post.weights {
        *w /= total;
    }
    Ok(())
}

/// Arm state: the current posterior and the cluster of the next pull.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReArmState {
    pub posterior: ParticlePosterior,
    pub cluster: usize,
}

/// Posterior chain used for index rollouts: each step draws an outcome from
/// the predictive, thins to `d3` particles, applies one SMC update and draws
/// the next cluster uniformly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomEffectsArm {
    pub priors: RePriors,
    pub d3: usize,
    pub sweeps: usize,
    /// Multiple of the predictive standard deviation used for reward bounds.
    pub bound_width: f64,
}

impl RandomEffectsArm {
    pub fn new(priors: RePriors, d3: usize) -> Self {
        RandomEffectsArm { priors, d3, sweeps: 5, bound_width: 4.0 }
    }

    /// Reward bounds around the current reward.
    pub fn truncation(&self, s: &ReArmState, n: usize, gamma: DiscountFactor) -> Result<TruncationConfig> {
        let r = re_reward(&s.posterior, s.cluster)?;
        let sd = re_predictive_sd(&s.posterior, s.cluster)?.max(1e-12);
        TruncationConfig::new(n, r - self.bound_width * sd, r + self.bound_width * sd, gamma)
    }
}

impl MarkovRewardModel for RandomEffectsArm {
    type State = ReArmState;

    fn reward(&self, s: &ReArmState) -> f64 {
        re_reward(&s.posterior, s.cluster).unwrap_or(f64::NAN)
    }

    fn step(&self, s: &ReArmState, stream: &mut Stream) -> Result<ReArmState> {
        let y = re_predictive_sample(&s.posterior, s.cluster, stream)?;
        let thinned;
        let base = if s.posterior.len() > self.d3 {
            thinned = subsample(&s.posterior, self.d3, stream)?;
            &thinned
        } else {
            &s.posterior
        };
        let posterior = smc_update(base, y, s.cluster, &self.priors, self.sweeps, stream)?;
        let cluster = stream.index(posterior.clusters());
        Ok(ReArmState { posterior, cluster })
    }
}
