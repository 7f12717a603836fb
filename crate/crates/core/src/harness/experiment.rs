//! Policy comparison on Gaussian random-effects bandits.
//!
//! Every arm's clusters, outcomes and SMC posteriors are generated once per
//! replication; the `u`-th pull of arm `a` under any policy sees posterior
//! `Π_{a,u}` and cluster `C_{a,u}` and returns outcome `O_{a,u}`.

use std::collections::HashMap;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::policies::{argmax_uniform, bayes_ucb_choice, thompson_choice, ArmView};
use crate::error::{invalid, Error, Result};
use crate::fabp::DiscountFactor;
use crate::harness::bootstrap::pairwise_sum;
use crate::models::random_effects::{
    prior_draw, re_reward, smc_update, Particle, ParticlePosterior, RandomEffectsArm, ReArmState, RePriors,
};
use crate::rng::{Stream, StreamKey};
use crate::solver::{solve, SolverConfig, StepKind, StepSizeRule};
use crate::tree::ReplicationSchedule;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    Sbgiap,
    Thompson,
    BayesUcb,
    /// Pulls the arm with the largest true mean; a reference, not a policy
    /// a learner could run.
    Oracle,
}

impl Policy {
    pub fn name(self) -> &'static str {
        match self {
            Policy::Sbgiap => "sbgiap",
            Policy::Thompson => "thompson",
            Policy::BayesUcb => "bayes-ucb",
            Policy::Oracle => "oracle",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub arms: usize,
    pub clusters: usize,
    pub particles: usize,
    pub rollout_particles: usize,
    pub gibbs_sweeps: usize,
    pub theta0: f64,
    pub sigma0_sq: f64,
    pub alpha0: f64,
    pub beta0: f64,
    pub alpha1: f64,
    pub beta1: f64,
}

impl ModelSection {
    pub fn priors(&self) -> RePriors {
        RePriors {
            theta0: self.theta0,
            sigma0_sq: self.sigma0_sq,
            alpha0: self.alpha0,
            beta0: self.beta0,
            alpha1: self.alpha1,
            beta1: self.beta1,
        }
    }
}

/// Index computation used by the SBGIAP policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub gamma: f64,
    pub depth: usize,
    pub n: usize,
    pub horizon: usize,
    /// Fixed number of stochastic-approximation iterations.
    pub iterations: usize,
    pub step: StepKind,
    pub bound_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub horizon: usize,
    pub policies: Vec<Policy>,
    pub eval_discounts: Vec<f64>,
    pub replications: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSection,
    pub solver: SolverSection,
    pub experiment: ExperimentSection,
}

impl ExperimentConfig {
    /// Desk-scale defaults: three arms and clusters, `T = 50`, 200 replications.
    pub fn desk() -> Self {
        let mut cfg = Self::full();
        cfg.experiment.horizon = 50;
        cfg.experiment.replications = 200;
        cfg
    }

    /// Full-scale settings (`T = 300`, 2500 replications); long-running.
    pub fn full() -> Self {
        let p = RePriors::default();
        ExperimentConfig {
            model: ModelSection {
                arms: 3,
                clusters: 3,
                particles: 100,
                rollout_particles: 3,
                gibbs_sweeps: 5,
                theta0: p.theta0,
                sigma0_sq: p.sigma0_sq,
                alpha0: p.alpha0,
                beta0: p.beta0,
                alpha1: p.alpha1,
                beta1: p.beta1,
            },
            solver: SolverSection {
                gamma: 0.8,
                depth: 1,
                n: 1,
                horizon: 25,
                iterations: 100,
                step: StepKind::Adaptive,
                bound_width: 4.0,
            },
            experiment: ExperimentSection {
                horizon: 300,
                policies: vec![Policy::Sbgiap, Policy::Thompson, Policy::BayesUcb],
                eval_discounts: vec![0.8, 0.9, 0.99],
                replications: 2500,
                seed: 20_240_101,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        let e = &self.experiment;
        self.model.priors().validate()?;
        if m.arms == 0 || m.clusters == 0 || m.particles == 0 || m.rollout_particles == 0 {
            return invalid("arms, clusters and particle counts must be positive");
        }
        if m.rollout_particles > m.particles {
            return invalid("rollout_particles must not exceed particles");
        }
        if e.horizon == 0 || e.replications == 0 {
            return invalid("horizon and replications must be at least 1");
        }
        if e.policies.is_empty() {
            return invalid("at least one policy is required");
        }
        if e.policies.contains(&Policy::BayesUcb) && e.horizon < 2 {
            return invalid("Bayes-UCB needs horizon >= 2");
        }
        for &g in &e.eval_discounts {
            DiscountFactor::new(g)?;
        }
        DiscountFactor::new(self.solver.gamma)?;
        ReplicationSchedule::uniform(self.solver.depth, self.solver.n)?;
        if self.solver.horizon == 0 || self.solver.iterations == 0 || !(self.solver.bound_width > 0.0) {
            return invalid("solver horizon, iterations and bound_width must be positive");
        }
        Ok(())
    }
}

/// Pre-generated data of one arm in one replication.
#[derive(Clone, Debug)]
pub struct ArmData {
    pub truth: Particle,
    pub clusters: Vec<usize>,
    pub outcomes: Vec<f64>,
    pub posteriors: Vec<ParticlePosterior>,
}

impl ArmData {
    pub fn true_mean(&self, pulls: usize) -> f64 {
        self.truth.mean(self.clusters[pulls])
    }

    fn state(&self, pulls: usize) -> ReArmState {
        ReArmState { posterior: self.posteriors[pulls].clone(), cluster: self.clusters[pulls] }
    }
}

/// Hex SHA-256 of a sequence of outcomes.
pub fn outcome_digest(xs: &[f64]) -> String {
    let mut h = Sha256::new();
    for x in xs {
        h.update(x.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Draws the truth, clusters, outcomes and posterior sequence of one arm.
pub fn generate_arm(cfg: &ExperimentConfig, key: StreamKey) -> Result<ArmData> {
    let m = &cfg.model;
    let t = cfg.experiment.horizon;
    let priors = m.priors();
    let truth = prior_draw(&priors, m.clusters, &mut key.child(0).stream())?;
    let mut cs = key.child(1).stream();
    let clusters: Vec<usize> = (0..=t).map(|_| cs.index(m.clusters)).collect();
    let mut os = key.child(2).stream();
    let outcomes: Vec<f64> = (0..t)
        .map(|u| {
            let z: f64 = StandardNormal.sample(&mut os);
            truth.mean(clusters[u]) + truth.v1.sqrt() * z
        })
        .collect();
    let mut posteriors = Vec::with_capacity(t);
    posteriors.push(ParticlePosterior::from_prior(&priors, m.clusters, m.particles, &mut key.child(3).stream())?);
    for u in 0..t - 1 {
        let mut s = key.child(4).child(u as u64).stream();
        let next = smc_update(&posteriors[u], outcomes[u], clusters[u], &priors, m.gibbs_sweeps, &mut s)?;
        posteriors.push(next);
    }
    Ok(ArmData { truth, clusters, outcomes, posteriors })
}

/// One policy's run within a replication.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyRun {
    pub policy: Policy,
    pub arms: Vec<usize>,
    pub expected: Vec<f64>,
    pub optimal: Vec<bool>,
    /// `running[j][t]`: discounted total through step `t + 1` at `eval_discounts[j]`.
    pub running: Vec<Vec<f64>>,
    /// Digest of the outcomes each arm returned, in pull order.
    pub digests: Vec<String>,
    /// Whether each digest equals that of the pre-generated prefix.
    pub fair: bool,
}

impl PolicyRun {
    pub fn final_total(&self, j: usize) -> f64 {
        *self.running[j].last().expect("horizon >= 1")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationResult {
    pub replication: usize,
    /// Reason the replication was dropped, if any.
    pub excluded: Option<String>,
    pub runs: Vec<PolicyRun>,
}

/// Source of SBGIAP indices, cached per `(arm, pulls)`.
struct IndexCache<'a> {
    cfg: &'a ExperimentConfig,
    key: StreamKey,
    model: RandomEffectsArm,
    cache: HashMap<(usize, usize), f64>,
}

impl<'a> IndexCache<'a> {
    fn new(cfg: &'a ExperimentConfig, key: StreamKey) -> Self {
        let mut model = RandomEffectsArm::new(cfg.model.priors(), cfg.model.rollout_particles);
        model.sweeps = cfg.model.gibbs_sweeps;
        model.bound_width = cfg.solver.bound_width;
        IndexCache { cfg, key, model, cache: HashMap::new() }
    }

    fn get(&mut self, arm: usize, pulls: usize, data: &ArmData) -> Result<f64> {
        if let Some(&v) = self.cache.get(&(arm, pulls)) {
            return Ok(v);
        }
        let s = &self.cfg.solver;
        let state = data.state(pulls);
        let trunc = self.model.truncation(&state, s.horizon, DiscountFactor::new(s.gamma)?)?;
        let nu0 = re_reward(&state.posterior, state.cluster)?;
        let mut sc = SolverConfig::new(trunc, ReplicationSchedule::uniform(s.depth, s.n)?, nu0, f64::MIN_POSITIVE)?;
        sc.step = StepSizeRule::with_max_cap(s.step, &trunc)?;
        sc.min_iters = s.iterations;
        sc.max_iters = s.iterations;
        let seed = self.key.child(arm as u64).child(pulls as u64).raw();
        let v = solve(&self.model, &state, &sc, seed)?.nu_final;
        self.cache.insert((arm, pulls), v);
        Ok(v)
    }
}

fn run_policy(
    cfg: &ExperimentConfig,
    policy: Policy,
    pidx: usize,
    data: &[ArmData],
    key: StreamKey,
    indices: &mut IndexCache<'_>,
) -> Result<PolicyRun> {
    let horizon = cfg.experiment.horizon;
    let a = data.len();
    let mut pulls = vec![0usize; a];
    let mut consumed: Vec<Vec<f64>> = vec![Vec::new(); a];
    let mut arms = Vec::with_capacity(horizon);
    let mut expected = Vec::with_capacity(horizon);
    let mut optimal = Vec::with_capacity(horizon);
    let pkey = key.child(30 + pidx as u64);
    for t in 1..=horizon {
        let mut stream: Stream = pkey.child(t as u64).stream();
        let means: Vec<f64> = (0..a).map(|i| data[i].true_mean(pulls[i])).collect();
        let choice = match policy {
            Policy::Oracle => argmax_uniform(&means, &mut stream),
            Policy::Thompson | Policy::BayesUcb => {
                let views: Vec<ArmView<'_>> = (0..a)
                    .map(|i| ArmView { posterior: &data[i].posteriors[pulls[i]], cluster: data[i].clusters[pulls[i]] })
                    .collect();
                if policy == Policy::Thompson {
                    thompson_choice(&views, &mut stream)?
                } else {
                    bayes_ucb_choice(&views, t, horizon, &mut stream)?
                }
            }
            Policy::Sbgiap => {
                let idx = (0..a).map(|i| indices.get(i, pulls[i], &data[i])).collect::<Result<Vec<_>>>()?;
                argmax_uniform(&idx, &mut stream)
            }
        };
        let best = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        arms.push(choice);
        expected.push(means[choice]);
        optimal.push(means[choice] >= best);
        consumed[choice].push(data[choice].outcomes[pulls[choice]]);
        pulls[choice] += 1;
    }
    let running = cfg
        .experiment
        .eval_discounts
        .iter()
        .map(|&g| {
            let mut acc = 0.0;
            let mut w = 1.0;
            expected
                .iter()
                .map(|&mu| {
                    acc += w * mu;
                    w *= g;
                    acc
                })
                .collect()
        })
        .collect();
    let digests: Vec<String> = consumed.iter().map(|xs| outcome_digest(xs)).collect();
    let fair = (0..a).all(|i| digests[i] == outcome_digest(&data[i].outcomes[..pulls[i]]));
    Ok(PolicyRun { policy, arms, expected, optimal, running, digests, fair })
}

/// Runs one replication; SMC degeneracy marks it excluded.
pub fn run_replication(cfg: &ExperimentConfig, r: usize) -> Result<ReplicationResult> {
    let key = StreamKey::root(cfg.experiment.seed).child(r as u64);
    let attempt = || -> Result<Vec<PolicyRun>> {
        let data = (0..cfg.model.arms)
            .map(|a| generate_arm(cfg, key.child(10).child(a as u64)))
            .collect::<Result<Vec<_>>>()?;
        let mut indices = IndexCache::new(cfg, key.child(20));
        cfg.experiment
            .policies
            .iter()
            .enumerate()
            .map(|(i, &p)| run_policy(cfg, p, i, &data, key, &mut indices))
            .collect()
    };
    match attempt() {
        Ok(runs) => Ok(ReplicationResult { replication: r, excluded: None, runs }),
        Err(Error::Degenerate(msg)) => Ok(ReplicationResult { replication: r, excluded: Some(msg), runs: vec![] }),
        Err(e) => Err(e),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub replications: Vec<ReplicationResult>,
}

impl ExperimentReport {
    pub fn included(&self) -> impl Iterator<Item = &ReplicationResult> {
        self.replications.iter().filter(|r| r.excluded.is_none())
    }

    pub fn excluded_count(&self) -> usize {
        self.replications.len() - self.included().count()
    }

    fn policy_index(&self, p: Policy) -> Result<usize> {
        self.config
            .experiment
            .policies
            .iter()
            .position(|&q| q == p)
            .ok_or_else(|| Error::InvalidParameter(format!("policy {} not in the experiment", p.name())))
    }

    fn discount_index(&self, g: f64) -> Result<usize> {
        self.config
            .experiment
            .eval_discounts
            .iter()
            .position(|&x| x == g)
            .ok_or_else(|| Error::InvalidParameter(format!("discount {g} not evaluated")))
    }

    /// Per-replication final discounted total of `a` minus that of `b`.
    pub fn final_differences(&self, a: Policy, b: Policy, discount: f64) -> Result<Vec<f64>> {
        let (ia, ib, j) = (self.policy_index(a)?, self.policy_index(b)?, self.discount_index(discount)?);
        Ok(self.included().map(|r| r.runs[ia].final_total(j) - r.runs[ib].final_total(j)).collect())
    }

    /// Mean running discounted total of `a` minus `b` at every step.
    pub fn mean_running_difference(&self, a: Policy, b: Policy, discount: f64) -> Result<Vec<f64>> {
        let (ia, ib, j) = (self.policy_index(a)?, self.policy_index(b)?, self.discount_index(discount)?);
        let reps: Vec<&ReplicationResult> = self.included().collect();
        let n = reps.len() as f64;
        Ok((0..self.config.experiment.horizon)
            .map(|t| {
                let d: Vec<f64> = reps.iter().map(|r| r.runs[ia].running[j][t] - r.runs[ib].running[j][t]).collect();
                pairwise_sum(&d) / n
            })
            .collect())
    }

    /// Fraction of included replications pulling an optimal arm at each step.
    pub fn optimal_frequency(&self, p: Policy) -> Result<Vec<f64>> {
        let i = self.policy_index(p)?;
        let reps: Vec<&ReplicationResult> = self.included().collect();
        let n = reps.len() as f64;
        Ok((0..self.config.experiment.horizon)
            .map(|t| {
                let d: Vec<f64> = reps.iter().map(|r| if r.runs[i].optimal[t] { 1.0 } else { 0.0 }).collect();
                pairwise_sum(&d) / n
            })
            .collect())
    }

    pub fn all_fair(&self) -> bool {
        self.included().all(|r| r.runs.iter().all(|p| p.fair))
    }
}

/// Runs every replication in parallel; results are in replication order.
pub fn run_bandit_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let replications = (0..cfg.experiment.replications)
        .into_par_iter()
        .map(|r| run_replication(cfg, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport { config: cfg.clone(), replications })
}
