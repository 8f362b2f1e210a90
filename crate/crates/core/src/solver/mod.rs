//! Point-based value iteration over alpha vectors.

mod discounted;
mod finite;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pomdp::{Belief, DiscretePomdp, Policy, PolicyError, SimRng};

pub use discounted::{expand_beliefs, solve_discounted, solve_discounted_on, solve_discounted_warm};
pub use finite::{exact_value_oracle, reachable_beliefs, solve_finite_horizon};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("reward table has {got} entries, expected {expected}")]
    RewardShape { expected: usize, got: usize },
    #[error("discount must lie in (0, 1), got {0}")]
    Discount(f64),
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("instance too large for exact enumeration ({0} histories)")]
    TooLarge(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SolverConfig {
    /// Size of the belief set (per stage for finite horizons).
    pub n_beliefs: usize,
    pub max_backup_rounds: usize,
    /// Stop once no belief value moves by more than this in a round.
    pub bellman_tolerance: f64,
    pub expansion_seed: u64,
    /// Minimum L1 distance for a new belief to join the set.
    pub expansion_threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            n_beliefs: 256,
            max_backup_rounds: 3000,
            bellman_tolerance: 1e-6,
            expansion_seed: 0,
            expansion_threshold: 1e-2,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.n_beliefs == 0 {
            return Err(SolverError::Config("n_beliefs must be at least 1".into()));
        }
        if !(self.bellman_tolerance > 0.0) {
            return Err(SolverError::Config("bellman_tolerance must be positive".into()));
        }
        if !(self.expansion_threshold >= 0.0) {
            return Err(SolverError::Config("expansion_threshold must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaVector {
    pub action: usize,
    pub values: Vec<f64>,
}

impl AlphaVector {
    pub fn dot(&self, b: &Belief) -> f64 {
        b.dot(&self.values)
    }
}

/// Index of the maximizing vector; ties go to the lowest index.
pub fn best_vector(vectors: &[AlphaVector], b: &Belief) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in vectors.iter().enumerate() {
        let d = v.dot(b);
        if d > best.1 {
            best = (i, d);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaPolicy {
    Stationary {
        gamma: f64,
        n_states: usize,
        vectors: Vec<AlphaVector>,
    },
    TimeIndexed {
        #[serde(rename = "T")]
        horizon: usize,
        n_states: usize,
        stages: Vec<Vec<AlphaVector>>,
    },
}

impl AlphaPolicy {
    pub fn n_states(&self) -> usize {
        match self {
            AlphaPolicy::Stationary { n_states, .. } | AlphaPolicy::TimeIndexed { n_states, .. } => {
                *n_states
            }
        }
    }

    fn vectors_at(&self, t: usize) -> Result<&[AlphaVector], PolicyError> {
        match self {
            AlphaPolicy::Stationary { vectors, .. } => Ok(vectors),
            AlphaPolicy::TimeIndexed { horizon, stages, .. } => stages
                .get(t)
                .map(|v| v.as_slice())
                .ok_or(PolicyError::Horizon { t, horizon: *horizon }),
        }
    }

    fn check(&self, b: &Belief) -> Result<(), PolicyError> {
        if b.len() != self.n_states() {
            return Err(PolicyError::Dimension {
                expected: self.n_states(),
                got: b.len(),
            });
        }
        Ok(())
    }

    /// Action of the maximizing vector at time `t`.
    pub fn policy_action(&self, b: &Belief, t: usize) -> Result<usize, PolicyError> {
        self.check(b)?;
        let vs = self.vectors_at(t)?;
        Ok(vs[best_vector(vs, b).0].action)
    }

    /// `max_α α · b` at time `t`.
    pub fn value(&self, b: &Belief, t: usize) -> Result<f64, PolicyError> {
        self.check(b)?;
        Ok(best_vector(self.vectors_at(t)?, b).1)
    }

    /// Value before the first observation: `Σ_o P(o) max_α α · b_o`.
    pub fn initial_value<M: DiscretePomdp + ?Sized>(&self, m: &M) -> f64 {
        initial_posteriors(m)
            .iter()
            .map(|(b, p)| p * self.value(b, 0).expect("policy matches model"))
            .sum()
    }

    pub fn n_vectors(&self) -> usize {
        match self {
            AlphaPolicy::Stationary { vectors, .. } => vectors.len(),
            AlphaPolicy::TimeIndexed { stages, .. } => stages.iter().map(Vec::len).sum(),
        }
    }
}

impl Policy for AlphaPolicy {
    fn act(&self, belief: &Belief, t: usize, _: &mut SimRng) -> Result<usize, PolicyError> {
        self.policy_action(belief, t)
    }
}

/// Picks an action uniformly at random at every step.
#[derive(Debug, Clone, Copy)]
pub struct UniformRandomPolicy {
    pub n_actions: usize,
}

impl Policy for UniformRandomPolicy {
    fn act(&self, _: &Belief, _: usize, rng: &mut SimRng) -> Result<usize, PolicyError> {
        Ok(rng.gen_range(0..self.n_actions))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub converged: bool,
    pub rounds: usize,
    pub n_beliefs: usize,
    pub n_vectors: usize,
    /// Largest change of a belief value in the last round.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub policy: AlphaPolicy,
    pub stats: SolveStats,
    /// Policy value before the first observation.
    pub value: f64,
}

/// The posterior after each possible first observation, with its
/// probability.
pub fn initial_posteriors<M: DiscretePomdp + ?Sized>(m: &M) -> Vec<(Belief, f64)> {
    let prior = Belief::from_sparse(m.n_states(), m.initial());
    (0..m.n_obs())
        .filter_map(|o| Belief::condition(m, prior.probs(), o).ok())
        .collect()
}

fn check_reward<M: DiscretePomdp + ?Sized>(m: &M, reward: &[f64]) -> Result<(), SolverError> {
    let expected = m.n_states() * m.n_actions();
    if reward.len() != expected {
        return Err(SolverError::RewardShape {
            expected,
            got: reward.len(),
        });
    }
    Ok(())
}

/// One point-based backup of `b` against `next`: for every action, pick the
/// best successor vector per observation and return the best resulting
/// vector with its value at `b`. `discount` multiplies the future term;
/// `fallback` is used for observations impossible from `b`.
pub(crate) fn backup<M: DiscretePomdp + ?Sized>(
    m: &M,
    reward: &[f64],
    discount: f64,
    next: &[AlphaVector],
    fallback: usize,
    b: &Belief,
) -> (AlphaVector, f64) {
    let n = m.n_states();
    let na = m.n_actions();
    let mut best: Option<(AlphaVector, f64)> = None;
    let mut chosen = vec![fallback; m.n_obs()];
    let mut touched: Vec<usize> = Vec::new();
    for a in 0..na {
        // Predicted next-state mass.
        let mut eta: Vec<(usize, f64)> = Vec::new();
        let mut dense = vec![0.0; n];
        for (x, p) in b.support() {
            for &(y, q) in m.transitions(x, a) {
                if dense[y] == 0.0 {
                    eta.push((y, 0.0));
                }
                dense[y] += p * q;
            }
        }
        for e in &mut eta {
            e.1 = dense[e.0];
        }
        // Observations with positive probability.
        touched.clear();
        for &(y, _) in &eta {
            for &(o, _) in m.observations(y) {
                if !touched.contains(&o) {
                    touched.push(o);
                }
            }
        }
        for c in chosen.iter_mut() {
            *c = fallback;
        }
        for &o in &touched {
            let mut arg = fallback;
            let mut val = f64::NEG_INFINITY;
            for (i, v) in next.iter().enumerate() {
                let d: f64 = eta
                    .iter()
                    .map(|&(y, p)| p * m.obs_prob(y, o) * v.values[y])
                    .sum();
                if d > val {
                    val = d;
                    arg = i;
                }
            }
            chosen[o] = arg;
        }
        // w(y) = Σ_o Z(y; o) α_{chosen[o]}(y)
        let w: Vec<f64> = (0..n)
            .map(|y| {
                m.observations(y)
                    .iter()
                    .map(|&(o, z)| z * next[chosen[o]].values[y])
                    .sum()
            })
            .collect();
        let values: Vec<f64> = (0..n)
            .map(|x| {
                let future: f64 = m.transitions(x, a).iter().map(|&(y, p)| p * w[y]).sum();
                reward[x * na + a] + discount * future
            })
            .collect();
        let v = b.dot(&values);
        if best.as_ref().map_or(true, |(_, bv)| v > *bv) {
            best = Some((AlphaVector { action: a, values }, v));
        }
    }
    best.expect("at least one action")
}
