//! Nested-simulation estimator of the optimal stopping value and exact
//! enumeration oracles for finite chains.
//!
//! A node of the estimator tree at level `k` owns a path and produces the
//! process `Z^(k)_1..Z^(k)_N` along it. Level one is the scaled cost process.
//! Level `k + 1` subtracts, at every `t`, the average minimum of `n_k`
//! level-`k` branches that share the path through `s_t` and then continue
//! independently. Child `1` of a node reuses the node's own path.
//!
//! Node keys: a node with key `q` continues its path from `q.child(0)`,
//! its path-sharing child is `q.child(1)`, and branch `j >= 2` taken at time
//! `t` is `q.child(j).child(t)`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fabp::{clamp_half, FiniteModel, MarkovRewardModel, TruncationConfig};
use crate::rng::{Stream, StreamKey};

pub const DEFAULT_NODE_BUDGET: u128 = 10_000_000;

/// Depth `K`, per-level branch counts and the number of outer replications.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicationSchedule {
    depth: usize,
    branches: Vec<usize>,
    outer: usize,
}

impl ReplicationSchedule {
    /// `branches[k - 1]` is the number of level-`k` branches below each
    /// level-`k + 1` node, for `k = 1..K-1`.
    pub fn new(depth: usize, branches: Vec<usize>, outer: usize) -> Result<Self> {
        if depth == 0 {
            return invalid("depth K must be at least 1");
        }
        if branches.len() != depth - 1 {
            return invalid(format!("depth {depth} needs {} branch counts, got {}", depth - 1, branches.len()));
        }
        if outer == 0 || branches.contains(&0) {
            return invalid("branch and outer counts must be at least 1");
        }
        Ok(ReplicationSchedule { depth, branches, outer })
    }

    /// Same branch count `n` at every level, one outer replication.
    pub fn uniform(depth: usize, n: usize) -> Result<Self> {
        Self::new(depth, vec![n; depth.saturating_sub(1)], 1)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn branches(&self) -> &[usize] {
        &self.branches
    }

    pub fn outer(&self) -> usize {
        self.outer
    }

    /// Number of tree nodes (simulated paths) one estimate touches.
    pub fn nodes(&self, horizon: usize) -> u128 {
        let mut level = 1u128;
        let mut total = 1u128;
        for &n in &self.branches {
            level = level.saturating_mul(1 + horizon as u128 * n as u128);
            total = total.saturating_add(level);
        }
        total.saturating_mul(self.outer as u128)
    }
}

/// Projected value `V`, its ν-derivative `h`, and diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathTreeEstimate {
    pub value: f64,
    pub derivative: f64,
    /// Averaged `min_u Z^(k)_u` for `k = 1..K`.
    pub per_k: Vec<f64>,
    /// Sum of `per_k` before projection onto `[-1/2, 1/2]`.
    pub raw: f64,
    pub clipped: bool,
}

struct NodePath<S> {
    states: Vec<S>,
    rewards: Vec<f64>,
    sigma: usize,
}

impl<S: Clone> NodePath<S> {
    fn shared_prefix(&self, t: usize) -> NodePath<S> {
        let end = (t + 1).min(self.states.len());
        NodePath { states: self.states[..end].to_vec(), rewards: self.rewards[..end].to_vec(), sigma: self.sigma }
    }
}

struct Tree<'a, M: MarkovRewardModel> {
    model: &'a M,
    trunc: &'a TruncationConfig,
    branches: &'a [usize],
    nu: f64,
    c: f64,
    clamp: bool,
    gpow: Vec<f64>,
    /// `slope[u] = c (1 - γ^u) / (1 - γ)`.
    slope: Vec<f64>,
    leaf_fast_path: bool,
}

#[inline]
fn argmin(z: &[f64]) -> (f64, usize) {
    let mut best = z[0];
    let mut at = 0;
    for (i, &v) in z.iter().enumerate().skip(1) {
        if v < best {
            best = v;
            at = i;
        }
    }
    (best, at)
}

impl<'a, M: MarkovRewardModel> Tree<'a, M> {
    fn new(model: &'a M, trunc: &'a TruncationConfig, branches: &'a [usize], nu: f64) -> Self {
        let gpow = trunc.gamma_powers();
        let c = trunc.c();
        let g = trunc.gamma().value();
        let slope = gpow.iter().map(|p| c * (1.0 - p) / (1.0 - g)).collect();
        Tree { model, trunc, branches, nu, c, clamp: trunc.clamps_at(nu), gpow, slope, leaf_fast_path: true }
    }

    #[inline]
    fn z(&self, raw: f64) -> f64 {
        if self.clamp {
            clamp_half(raw)
        } else {
            raw
        }
    }

    /// Extends a path until it leaves the reward bounds or holds `N` states.
    fn grow(&self, path: &mut NodePath<M::State>, stream: &mut Stream) -> Result<()> {
        let n = self.trunc.horizon();
        loop {
            let i = path.states.len() - 1;
            if !self.trunc.in_bounds(path.rewards[i]) {
                path.sigma = i;
                return Ok(());
            }
            if path.states.len() == n {
                path.sigma = n;
                return Ok(());
            }
            let next = self.model.step(&path.states[i], stream)?;
            path.rewards.push(self.model.reward(&next));
            path.states.push(next);
        }
    }

    fn root_path(&self, s0: &M::State, key: StreamKey) -> Result<NodePath<M::State>> {
        let mut p = NodePath { states: vec![s0.clone()], rewards: vec![self.model.reward(s0)], sigma: 0 };
        self.grow(&mut p, &mut key.child(0).stream())?;
        Ok(p)
    }

    /// Unscaled charged sums `Σ_{u<t∧σ} γ^u (ν - R(s_u))` and slopes of a
    /// path, indexed `t - 1`.
    fn level_one(&self, path: &NodePath<M::State>, raw: &mut [f64], b: &mut [f64]) {
        let n = self.trunc.horizon();
        let mut acc = 0.0;
        for t in 1..=n {
            if t <= path.sigma {
                acc += self.gpow[t - 1] * (self.nu - path.rewards[t - 1]);
            }
            raw[t - 1] = acc;
            b[t - 1] = self.slope[t.min(path.sigma)];
        }
    }

    /// `Z^(k)` and its slopes along `path` for the node with key `key`.
    fn values(&self, k: usize, key: StreamKey, path: &NodePath<M::State>, z: &mut [f64], b: &mut [f64]) -> Result<()> {
        let n = self.trunc.horizon();
        if k == 1 {
            self.level_one(path, z, b);
            for v in z.iter_mut() {
                *v = self.z(self.c * *v);
            }
            return Ok(());
        }
        let count = self.branches[k - 2];
        let inv = 1.0 / count as f64;
        let mut cz = vec![0.0; n];
        let mut cb = vec![0.0; n];
        if k == 2 && self.leaf_fast_path {
            let mut raw = vec![0.0; n];
            self.level_one(path, &mut raw, &mut cb);
            for (c, &r) in cz.iter_mut().zip(&raw) {
                *c = self.z(self.c * r);
            }
            // Prefix minima of the shared level-one process.
            let mut pmin = Vec::with_capacity(n);
            let (mut best, mut at) = (f64::INFINITY, 0);
            for (u, &v) in cz.iter().enumerate() {
                if v < best {
                    best = v;
                    at = u + 1;
                }
                pmin.push((best, at));
            }
            for t in 1..=n {
                let (mut sm, mut sb) = (0.0, 0.0);
                for j in 2..=count + 1 {
                    let (m, u) = self.leaf_min(key.child(j as u64).child(t as u64), path, t, &raw, &pmin)?;
                    sm += m;
                    sb += self.slope[u];
                }
                z[t - 1] = cz[t - 1] - sm * inv;
                b[t - 1] = cb[t - 1] - sb * inv;
            }
            return Ok(());
        }
        self.values(k - 1, key.child(1), path, &mut cz, &mut cb)?;
        let mut bz = vec![0.0; n];
        let mut bb = vec![0.0; n];
        for t in 1..=n {
            let (mut sm, mut sb) = (0.0, 0.0);
            for j in 2..=count + 1 {
                let bkey = key.child(j as u64).child(t as u64);
                let mut bp = path.shared_prefix(t);
                if t + 1 < path.states.len() {
                    self.grow(&mut bp, &mut bkey.child(0).stream())?;
                }
                self.values(k - 1, bkey, &bp, &mut bz, &mut bb)?;
                let (m, u) = argmin(&bz);
                sm += m;
                sb += bb[u];
            }
            z[t - 1] = cz[t - 1] - sm * inv;
            b[t - 1] = cb[t - 1] - sb * inv;
        }
        Ok(())
    }

    /// Minimum and (1-based) argmin of a level-one branch sharing `path`
    /// through `s_t`.
    fn leaf_min(
        &self,
        key: StreamKey,
        path: &NodePath<M::State>,
        t: usize,
        raw: &[f64],
        pmin: &[(f64, usize)],
    ) -> Result<(f64, usize)> {
        let n = self.trunc.horizon();
        if t + 1 >= path.states.len() {
            // Nothing left to resample: the branch is the parent path.
            return Ok(pmin[n - 1]);
        }
        // Here t < σ and t < N - 1, so Z_1..Z_{t+1} are shared.
        let (mut best, mut at) = pmin[t];
        let mut acc = raw[t];
        let mut state = path.states[t].clone();
        let mut stream = key.child(0).stream();
        for v in t + 1..n {
            state = self.model.step(&state, &mut stream)?;
            let r = self.model.reward(&state);
            if !self.trunc.in_bounds(r) {
                break;
            }
            acc += self.gpow[v] * (self.nu - r);
            let z = self.z(self.c * acc);
            if z < best {
                best = z;
                at = v + 1;
            }
        }
        Ok((best, at))
    }
}

fn check_start<M: MarkovRewardModel>(model: &M, s0: &M::State, trunc: &TruncationConfig) -> Result<()> {
    let r = model.reward(s0);
    if !trunc.in_bounds(r) {
        return invalid(format!("initial reward {r} outside [{}, {}]", trunc.lower(), trunc.upper()));
    }
    Ok(())
}

/// Estimator `V` at charge `nu` with derivative, deterministic in `key`.
pub fn estimate<M: MarkovRewardModel>(
    model: &M,
    s0: &M::State,
    nu: f64,
    trunc: &TruncationConfig,
    schedule: &ReplicationSchedule,
    key: StreamKey,
) -> Result<PathTreeEstimate> {
    estimate_with_budget(model, s0, nu, trunc, schedule, key, DEFAULT_NODE_BUDGET)
}

pub fn estimate_with_budget<M: MarkovRewardModel>(
    model: &M,
    s0: &M::State,
    nu: f64,
    trunc: &TruncationConfig,
    schedule: &ReplicationSchedule,
    key: StreamKey,
    budget: u128,
) -> Result<PathTreeEstimate> {
    let needed = schedule.nodes(trunc.horizon());
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    check_start(model, s0, trunc)?;
    run_tree(Tree::new(model, trunc, &schedule.branches, nu), s0, schedule, key)
}

fn run_tree<M: MarkovRewardModel>(
    tree: Tree<'_, M>,
    s0: &M::State,
    schedule: &ReplicationSchedule,
    key: StreamKey,
) -> Result<PathTreeEstimate> {
    let n = tree.trunc.horizon();
    let mut z = vec![0.0; n];
    let mut b = vec![0.0; n];
    let mut per_k = Vec::with_capacity(schedule.depth);
    let mut slope = 0.0;
    let inv = 1.0 / schedule.outer as f64;
    for k in 1..=schedule.depth {
        let (mut sm, mut sb) = (0.0, 0.0);
        for o in 0..schedule.outer {
            let node = key.child(k as u64).child(o as u64);
            let path = tree.root_path(s0, node)?;
            tree.values(k, node, &path, &mut z, &mut b)?;
            let (m, u) = argmin(&z);
            sm += m;
            sb += b[u];
        }
        per_k.push(sm * inv);
        slope += sb * inv;
    }
    let raw: f64 = per_k.iter().sum();
    let clipped = !(-0.5..=0.5).contains(&raw);
    Ok(PathTreeEstimate { value: clamp_half(raw), derivative: if clipped { 0.0 } else { slope }, per_k, raw, clipped })
}

/// Same as [`estimate`] but always builds level-one branches through the
/// generic path; used to cross-check the leaf fast path.
#[doc(hidden)]
pub fn estimate_reference<M: MarkovRewardModel>(
    model: &M,
    s0: &M::State,
    nu: f64,
    trunc: &TruncationConfig,
    schedule: &ReplicationSchedule,
    key: StreamKey,
) -> Result<PathTreeEstimate> {
    check_start(model, s0, trunc)?;
    let mut tree = Tree::new(model, trunc, &schedule.branches, nu);
    tree.leaf_fast_path = false;
    run_tree(tree, s0, schedule, key)
}

/// A finite tree of histories carrying an adapted process.
///
/// Node `i` at depth `t` is a history through time `t` and holds `Z_t`;
/// the root (depth 0) holds no value. Every leaf sits at depth `N`.
#[derive(Clone, Debug)]
pub struct AdaptedTree {
    horizon: usize,
    parent: Vec<usize>,
    prob: Vec<f64>,
    depth: Vec<usize>,
    z: Vec<f64>,
    children: Vec<Vec<usize>>,
}

impl AdaptedTree {
    pub fn new(horizon: usize) -> Self {
        AdaptedTree {
            horizon,
            parent: vec![usize::MAX],
            prob: vec![1.0],
            depth: vec![0],
            z: vec![0.0],
            children: vec![Vec::new()],
        }
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Adds a child reached with conditional probability `prob` whose
    /// process value is `z`.
    pub fn add_child(&mut self, parent: usize, prob: f64, z: f64) -> Result<usize> {
        if parent >= self.len() || self.depth[parent] >= self.horizon {
            return invalid("child would exceed the horizon");
        }
        let i = self.len();
        self.parent.push(parent);
        self.prob.push(prob);
        self.depth.push(self.depth[parent] + 1);
        self.z.push(z);
        self.children.push(Vec::new());
        self.children[parent].push(i);
        Ok(i)
    }

    fn validate(&self) -> Result<()> {
        for i in 0..self.len() {
            let kids = &self.children[i];
            if kids.is_empty() {
                if self.depth[i] != self.horizon {
                    return invalid(format!("leaf {i} at depth {} < horizon", self.depth[i]));
                }
            } else {
                let total: f64 = kids.iter().map(|&c| self.prob[c]).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return invalid(format!("children of node {i} have total probability {total}"));
                }
            }
        }
        Ok(())
    }

    /// `inf_τ E[Z_τ]` over stopping times with values in `1..=N`.
    pub fn optimal_stopping(&self) -> Result<f64> {
        self.validate()?;
        let mut val = vec![0.0; self.len()];
        for i in (0..self.len()).rev() {
            val[i] = if self.children[i].is_empty() {
                self.z[i]
            } else {
                let cont: f64 = self.children[i].iter().map(|&c| self.prob[c] * val[c]).sum();
                if self.depth[i] == 0 {
                    cont
                } else {
                    self.z[i].min(cont)
                }
            };
        }
        Ok(val[0])
    }

    /// `E[min_u Z^(k)_u]` for `k = 1..=depth`.
    pub fn zk_terms(&self, depth: usize) -> Result<Vec<f64>> {
        self.validate()?;
        let len = self.len();
        let mut zk = self.z.clone();
        let mut run = vec![0.0; len];
        let mut cond = vec![0.0; len];
        let mut out = Vec::with_capacity(depth);
        for _ in 0..depth {
            // Nodes are stored parents-first, so one forward pass finds the
            // running minimum along every history.
            run[0] = f64::INFINITY;
            for i in 1..len {
                run[i] = run[self.parent[i]].min(zk[i]);
            }
            for i in (0..len).rev() {
                cond[i] = if self.children[i].is_empty() {
                    run[i]
                } else {
                    self.children[i].iter().map(|&c| self.prob[c] * cond[c]).sum()
                };
            }
            out.push(cond[0]);
            for i in 1..len {
                zk[i] -= cond[i];
            }
        }
        Ok(out)
    }
}

/// Enumerates every history of a finite model into an [`AdaptedTree`] of
/// scaled costs at charge `nu`.
pub fn cost_tree<M: FiniteModel>(
    model: &M,
    s0: &M::State,
    nu: f64,
    trunc: &TruncationConfig,
    budget: usize,
) -> Result<AdaptedTree> {
    let n = trunc.horizon();
    let c = trunc.c();
    let clamp = trunc.clamps_at(nu);
    let gpow = trunc.gamma_powers();
    let mut tree = AdaptedTree::new(n);
    // Per node: state while still informative, and the raw cost sum.
    let mut states: Vec<Option<M::State>> = vec![Some(s0.clone())];
    let mut acc = vec![0.0];
    let mut frontier = vec![0usize];
    for t in 0..n {
        let mut next = Vec::new();
        for &i in &frontier {
            let (inc, alive) = match &states[i] {
                Some(s) => {
                    let r = model.reward(s);
                    if trunc.in_bounds(r) {
                        (c * gpow[t] * (nu - r), t + 1 < n)
                    } else {
                        (0.0, false)
                    }
                }
                None => (0.0, false),
            };
            let a = acc[i] + inc;
            let z = if clamp { clamp_half(a) } else { a };
            let kids: Vec<(f64, Option<M::State>)> = match (&states[i], alive) {
                (Some(s), true) => model.outcomes(s).into_iter().map(|(p, s)| (p, Some(s))).collect(),
                _ => vec![(1.0, None)],
            };
            for (p, s) in kids {
                let j = tree.add_child(i, p, z)?;
                if tree.len() > budget {
                    return Err(Error::BudgetExceeded { needed: tree.len() as u128, budget: budget as u128 });
                }
                states.push(s);
                acc.push(a);
                next.push(j);
            }
        }
        frontier = next;
    }
    Ok(tree)
}

/// Exact `inf_τ E[Z_τ(ν)]` by backward induction.
pub fn exact_stopping_value<M: FiniteModel>(
    model: &M,
    s0: &M::State,
    nu: f64,
    trunc: &TruncationConfig,
) -> Result<f64> {
    cost_tree(model, s0, nu, trunc, DEFAULT_NODE_BUDGET as usize)?.optimal_stopping()
}

/// Exact `Σ_{k=1..K} E[min_u Z^(k)_u]`.
pub fn exact_zk_sum<M: FiniteModel>(
    model: &M,
    s0: &M::State,
    nu: f64,
    trunc: &TruncationConfig,
    depth: usize,
) -> Result<f64> {
    let terms = cost_tree(model, s0, nu, trunc, DEFAULT_NODE_BUDGET as usize)?.zk_terms(depth)?;
    Ok(terms.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fabp::DiscountFactor;
    use crate::models::bernoulli::{bernoulli_truncation_with_horizon, BernoulliArm};
    use crate::models::tabular::TabularChain;
    use crate::models::ExpFamState;

    fn two_period() -> AdaptedTree {
        let mut t = AdaptedTree::new(2);
        let a = t.add_child(0, 1.0, 0.1).unwrap();
        t.add_child(a, 0.5, -0.3).unwrap();
        t.add_child(a, 0.5, 0.4).unwrap();
        t
    }

    #[test]
    fn two_period_values() {
        let t = two_period();
        assert!((t.optimal_stopping().unwrap() - 0.05).abs() < 1e-15);
        let terms = t.zk_terms(2).unwrap();
        assert!((terms[0] + 0.1).abs() < 1e-15);
        assert!((terms[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn schedule_validation() {
        assert!(ReplicationSchedule::new(0, vec![], 1).is_err());
        assert!(ReplicationSchedule::new(2, vec![], 1).is_err());
        assert!(ReplicationSchedule::new(2, vec![0], 1).is_err());
        assert!(ReplicationSchedule::new(2, vec![1], 0).is_err());
        let s = ReplicationSchedule::uniform(3, 1).unwrap();
        assert_eq!(s.nodes(35), 1 + 36 + 36 * 36);
    }

    #[test]
    fn budget_is_enforced() {
        let tr = TruncationConfig::new(35, 0.0, 1.0, DiscountFactor::new(0.8).unwrap()).unwrap();
        let sched = ReplicationSchedule::uniform(6, 3).unwrap();
        let err = estimate(&TabularChain::constant(0.5), &0, 0.5, &tr, &sched, StreamKey::root(0));
        assert!(matches!(err, Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn rejects_out_of_bounds_start() {
        let tr = TruncationConfig::new(5, 0.0, 1.0, DiscountFactor::new(0.8).unwrap()).unwrap();
        let sched = ReplicationSchedule::uniform(1, 1).unwrap();
        assert!(estimate(&TabularChain::constant(2.0), &0, 0.5, &tr, &sched, StreamKey::root(0)).is_err());
    }

    #[test]
    fn fast_path_matches_reference() {
        let g = DiscountFactor::new(0.8).unwrap();
        let s = ExpFamState::new(2.0, 5.0);
        let tr = bernoulli_truncation_with_horizon(&s, 12, g).unwrap();
        for depth in 2..=3 {
            let sched = ReplicationSchedule::new(depth, vec![2; depth - 1], 2).unwrap();
            for seed in 0..5 {
                let key = StreamKey::root(seed);
                let a = estimate(&BernoulliArm, &s, 0.45, &tr, &sched, key).unwrap();
                let b = estimate_reference(&BernoulliArm, &s, 0.45, &tr, &sched, key).unwrap();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn constant_chain_has_no_corrections() {
        let tr = TruncationConfig::new(10, 0.0, 1.0, DiscountFactor::new(0.8).unwrap()).unwrap();
        let sched = ReplicationSchedule::uniform(3, 2).unwrap();
        for nu in [0.1, 0.3, 0.9] {
            let e = estimate(&TabularChain::constant(0.3), &0, nu, &tr, &sched, StreamKey::root(3)).unwrap();
            // Below the reward the minimum sits at the horizon instead of t = 1.
            let want = if nu >= 0.3 { tr.c() * (nu - 0.3) } else { (nu - 0.3) / 2.0 };
            assert!((e.value - want).abs() < 1e-15);
            assert!(e.per_k[1..].iter().all(|&v| v.abs() < 1e-15));
        }
    }
}
