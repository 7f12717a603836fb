//! Finite Markov chains given by explicit transition tables.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::fabp::{FiniteModel, MarkovRewardModel};
use crate::rng::Stream;

/// A chain on states `0..n` with per-state rewards and outcome lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularChain {
    rewards: Vec<f64>,
    transitions: Vec<Vec<(f64, usize)>>,
}

impl TabularChain {
    pub fn new(rewards: Vec<f64>, transitions: Vec<Vec<(f64, usize)>>) -> Result<Self> {
        if rewards.is_empty() || rewards.len() != transitions.len() {
            return invalid("need one transition list per state");
        }
        for (s, row) in transitions.iter().enumerate() {
            if row.is_empty() {
                return invalid(format!("state {s} has no successors"));
            }
            let mut total = 0.0;
            for &(p, next) in row {
                if !(p > 0.0) || next >= rewards.len() {
                    return invalid(format!("bad transition out of state {s}"));
                }
                total += p;
            }
            if (total - 1.0).abs() > 1e-12 {
                return invalid(format!("probabilities out of state {s} sum to {total}"));
            }
        }
        Ok(TabularChain { rewards, transitions })
    }

    /// One absorbing state with reward `r`.
    pub fn constant(r: f64) -> Self {
        TabularChain { rewards: vec![r], transitions: vec![vec![(1.0, 0)]] }
    }

    pub fn num_states(&self) -> usize {
        self.rewards.len()
    }
}

impl MarkovRewardModel for TabularChain {
    type State = usize;

    #[inline]
    fn reward(&self, s: &usize) -> f64 {
        self.rewards[*s]
    }

    fn step(&self, s: &usize, stream: &mut Stream) -> Result<usize> {
        let row = &self.transitions[*s];
        if row.len() == 1 {
            return Ok(row[0].1);
        }
        let u = stream.uniform();
        let mut acc = 0.0;
        for &(p, next) in row {
            acc += p;
            if u < acc {
                return Ok(next);
            }
        }
        Ok(row[row.len() - 1].1)
    }
}

impl FiniteModel for TabularChain {
    fn outcomes(&self, s: &usize) -> Vec<(f64, usize)> {
        self.transitions[*s].clone()
    }
}
