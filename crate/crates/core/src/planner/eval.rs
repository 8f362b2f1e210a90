use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PlannerError;
use crate::pomdp::{mix_seed, sample_trajectory, Belief, DiscretePomdp, Policy, SimRng, StoppingModel};
use crate::product::ProductPomdp;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub n: usize,
    /// Mean cumulative reward.
    pub r_hat: f64,
    pub r_se: f64,
    /// Fraction of runs ending in an accepting automaton state.
    pub p_hat: f64,
    pub p_se: f64,
}

impl McEstimate {
    fn from_samples(samples: &[(f64, bool)]) -> Self {
        let n = samples.len();
        let nf = n as f64;
        let r_hat = samples.iter().map(|s| s.0).sum::<f64>() / nf;
        let p_hat = samples.iter().filter(|s| s.1).count() as f64 / nf;
        let se = |var: f64| if n > 1 { (var / (nf - 1.0) / nf).sqrt() } else { 0.0 };
        let r_var = samples.iter().map(|s| (s.0 - r_hat).powi(2)).sum::<f64>();
        let p_var = samples
            .iter()
            .map(|s| (if s.1 { 1.0 } else { 0.0 } - p_hat).powi(2))
            .sum::<f64>();
        McEstimate {
            n,
            r_hat,
            r_se: se(r_var),
            p_hat,
            p_se: se(p_var),
        }
    }
}

/// A distribution over pure policies, sampled once per run.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedPolicy<P> {
    pub support: Vec<P>,
    pub weights: Vec<f64>,
}

impl<P> MixedPolicy<P> {
    pub fn uniform(support: Vec<P>) -> Self {
        let w = 1.0 / support.len() as f64;
        let weights = vec![w; support.len()];
        MixedPolicy { support, weights }
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        if self.support.is_empty() || self.support.len() != self.weights.len() {
            return Err(PlannerError::Weights(format!(
                "{} weights for {} policies",
                self.weights.len(),
                self.support.len()
            )));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(PlannerError::Weights("weights must be nonnegative".into()));
        }
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(PlannerError::Weights(format!("weights sum to {sum}")));
        }
        Ok(())
    }

    pub fn component(&self, rng: &mut SimRng) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &w) in self.weights.iter().enumerate() {
            if w > 0.0 {
                acc += w;
                last = i;
                if u < acc {
                    return i;
                }
            }
        }
        last
    }
}

fn rollout<P: Policy + ?Sized>(
    prod: &ProductPomdp,
    policy: &P,
    seed: u64,
) -> Result<(f64, bool), PlannerError> {
    let run = sample_trajectory(prod, policy, seed)?;
    Ok((run.total_reward(), prod.final_satisfied(&run)))
}

fn collect(samples: Vec<Result<(f64, bool), PlannerError>>) -> Result<McEstimate, PlannerError> {
    let samples: Vec<(f64, bool)> = samples.into_iter().collect::<Result<_, _>>()?;
    Ok(McEstimate::from_samples(&samples))
}

/// `n` independent runs; run `i` uses seed `mix_seed(seed, i)`.
pub fn mc_evaluate<P: Policy + ?Sized>(
    prod: &ProductPomdp,
    policy: &P,
    n: usize,
    seed: u64,
) -> Result<McEstimate, PlannerError> {
    if n == 0 {
        return Err(PlannerError::Config("at least one rollout is needed".into()));
    }
    collect(
        (0..n as u64)
            .into_par_iter()
            .map(|i| rollout(prod, policy, mix_seed(seed, i)))
            .collect(),
    )
}

// Keeps the component draw off the trajectory's random stream.
const COMPONENT_SALT: u64 = 0x6D69_7874_7572_6521;

/// Like [`mc_evaluate`], drawing a component policy before each run. Run
/// `i` uses the same trajectory seed as in [`mc_evaluate`].
pub fn mc_evaluate_mixed<P: Policy>(
    prod: &ProductPomdp,
    mix: &MixedPolicy<P>,
    n: usize,
    seed: u64,
) -> Result<McEstimate, PlannerError> {
    mix.validate()?;
    if n == 0 {
        return Err(PlannerError::Config("at least one rollout is needed".into()));
    }
    collect(
        (0..n as u64)
            .into_par_iter()
            .map(|i| {
                let mut pick = SimRng::seed_from_u64(mix_seed(seed ^ COMPONENT_SALT, i));
                let c = mix.component(&mut pick);
                rollout(prod, &mix.support[c], mix_seed(seed, i))
            })
            .collect(),
    )
}

const EXACT_LIMIT: f64 = 1e6;

/// Exact `(E Σ_t r×, P(r^f(X_{T+1}) = 1))` for a deterministic policy on a
/// fixed-horizon product, by recursion over observation histories.
pub fn exact_evaluate<P: Policy + ?Sized>(
    prod: &ProductPomdp,
    policy: &P,
) -> Result<(f64, f64), PlannerError> {
    let horizon = match prod.stopping() {
        StoppingModel::Fixed { horizon } => horizon,
        other => {
            return Err(PlannerError::Stopping {
                expected: "fixed",
                got: format!("{other:?}"),
            })
        }
    };
    if (prod.n_obs() as f64).powi(horizon as i32 + 1) > EXACT_LIMIT {
        return Err(PlannerError::Config(format!(
            "horizon {horizon} is too long for exact evaluation"
        )));
    }
    let n = prod.n_states();
    let mut prior = vec![0.0; n];
    for &(x, p) in prod.initial() {
        prior[x] += p;
    }
    let mut rng = SimRng::seed_from_u64(0);
    let mut acc = (0.0, 0.0);
    for o in 0..prod.n_obs() {
        let joint: Vec<f64> = (0..n).map(|x| prior[x] * prod.obs_prob(x, o)).collect();
        exact_step(prod, policy, &joint, 0, horizon, &mut rng, &mut acc)?;
    }
    Ok(acc)
}

// `joint[x] = P(X_t = x, o_0 … o_t)`.
fn exact_step<P: Policy + ?Sized>(
    prod: &ProductPomdp,
    policy: &P,
    joint: &[f64],
    t: usize,
    horizon: usize,
    rng: &mut SimRng,
    acc: &mut (f64, f64),
) -> Result<(), PlannerError> {
    let mass: f64 = joint.iter().sum();
    if mass <= 0.0 {
        return Ok(());
    }
    let belief = Belief::new(joint.iter().map(|p| p / mass).collect())?;
    let a = policy.act(&belief, t, rng)?;
    let n = prod.n_states();
    let mut next = vec![0.0; n];
    for (x, &p) in joint.iter().enumerate() {
        if p > 0.0 {
            acc.0 += p * prod.reward(x, a);
            for &(y, q) in prod.transitions(x, a) {
                next[y] += p * q;
            }
        }
    }
    if t == horizon {
        acc.1 += next.iter().zip(prod.final_rewards()).map(|(p, f)| p * f).sum::<f64>();
        return Ok(());
    }
    for o in 0..prod.n_obs() {
        let j: Vec<f64> = (0..n).map(|y| next[y] * prod.obs_prob(y, o)).collect();
        exact_step(prod, policy, &j, t + 1, horizon, rng, acc)?;
    }
    Ok(())
}

/// `(1 - γ)/γ · Σ_{t≥1} γ^t E[r^f(X_t)]` when `action` is played forever,
/// by forward recursion truncated once `γ^t < 1e-12`.
pub fn open_loop_final_series(prod: &ProductPomdp, action: usize, gamma: f64) -> f64 {
    let n = prod.n_states();
    let mut d = vec![0.0; n];
    for &(x, p) in prod.initial() {
        d[x] += p;
    }
    let mut sum = 0.0;
    let mut g = 1.0;
    while g >= 1e-12 {
        let mut next = vec![0.0; n];
        for (x, &p) in d.iter().enumerate() {
            if p > 0.0 {
                for &(y, q) in prod.transitions(x, action) {
                    next[y] += p * q;
                }
            }
        }
        d = next;
        g *= gamma;
        sum += g * d.iter().zip(prod.final_rewards()).map(|(p, f)| p * f).sum::<f64>();
    }
    (1.0 - gamma) / gamma * sum
}
