use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{belief_init, belief_update, Belief, DiscretePomdp, PomdpError, StoppingModel};

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("policy expects beliefs over {expected} states, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("time {t} is past the policy horizon {horizon}")]
    Horizon { t: usize, horizon: usize },
    #[error("policy chose action {action} but the model has {n_actions}")]
    Action { action: usize, n_actions: usize },
}

/// Belief-based action selection. `rng` is the rollout's generator, for
/// randomized policies.
pub trait Policy: Sync {
    fn act(&self, belief: &Belief, t: usize, rng: &mut SimRng) -> Result<usize, PolicyError>;
}

impl<P: Policy + ?Sized> Policy for &P {
    fn act(&self, belief: &Belief, t: usize, rng: &mut SimRng) -> Result<usize, PolicyError> {
        (**self).act(belief, t, rng)
    }
}

/// One time step: the state, the observation emitted in it, the action
/// taken and its reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub state: usize,
    pub obs: usize,
    pub action: usize,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Steps `t = 0..=T`.
    pub steps: Vec<Step>,
    /// `X_{T+1}`, drawn from the last transition.
    pub terminal: usize,
}

impl Trajectory {
    /// Realized horizon `T`.
    pub fn horizon(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn states(&self) -> impl Iterator<Item = usize> + '_ {
        self.steps.iter().map(|s| s.state)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent seed for stream `index` of `base`.
pub fn mix_seed(base: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base) ^ splitmix64(index.wrapping_add(0x632B_E59B_D9B4_E019)))
}

/// Draws an index from a sparse distribution.
pub fn sample_sparse(row: &[(usize, f64)], rng: &mut SimRng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(i, p) in row {
        acc += p;
        if u < acc {
            return i;
        }
    }
    row.last().expect("nonempty distribution").0
}

/// Simulates one run under `policy`. The observation at `t = 0` arrives
/// before the first action; with geometric stopping the run ends after step
/// `t` with probability `1 - γ`, and the reward of that last step counts.
pub fn sample_trajectory<M, P>(m: &M, policy: &P, seed: u64) -> Result<Trajectory, PomdpError>
where
    M: DiscretePomdp + ?Sized,
    P: Policy + ?Sized,
{
    let mut rng = SimRng::seed_from_u64(seed);
    let stopping = m.stopping();
    let mut s = sample_sparse(m.initial(), &mut rng);
    let mut o = sample_sparse(m.observations(s), &mut rng);
    let mut b = belief_init(m, o)?;
    let mut steps = Vec::new();
    for t in 0.. {
        let a = policy.act(&b, t, &mut rng)?;
        if a >= m.n_actions() {
            return Err(PolicyError::Action {
                action: a,
                n_actions: m.n_actions(),
            }
            .into());
        }
        steps.push(Step {
            state: s,
            obs: o,
            action: a,
            reward: m.reward(s, a),
        });
        let next = sample_sparse(m.transitions(s, a), &mut rng);
        let stop = match stopping {
            StoppingModel::Fixed { horizon } => t >= horizon,
            StoppingModel::Geometric { gamma } => rng.gen::<f64>() >= gamma,
        };
        if stop {
            return Ok(Trajectory {
                steps,
                terminal: next,
            });
        }
        s = next;
        o = sample_sparse(m.observations(s), &mut rng);
        b = belief_update(m, &b, a, o)?;
    }
    unreachable!()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltlf::Alphabet;
    use crate::pomdp::{LabeledPomdp, PomdpBuilder};

    pub(crate) struct Constant(pub usize);

    impl Policy for Constant {
        fn act(&self, _: &Belief, _: usize, _: &mut SimRng) -> Result<usize, PolicyError> {
            Ok(self.0)
        }
    }

    struct Uniform(usize);

    impl Policy for Uniform {
        fn act(&self, _: &Belief, _: usize, rng: &mut SimRng) -> Result<usize, PolicyError> {
            Ok(rng.gen_range(0..self.0))
        }
    }

    // s0 -> s1 -> s2 -> s2, fully observed, reward = index + 1.
    fn chain(stopping: StoppingModel) -> LabeledPomdp {
        let names: Vec<String> = (0..3).map(|i| format!("s{i}")).collect();
        let mut b = PomdpBuilder::new(
            "chain",
            names.clone(),
            vec!["go".into(), "wait".into()],
            names,
            Alphabet::new([]).unwrap(),
            stopping,
        )
        .unwrap();
        b.initial(0, 1.0);
        for s in 0..3 {
            b.transition(s, 0, (s + 1).min(2), 1.0);
            b.transition(s, 1, s, 1.0);
            b.observe(s, s, 1.0);
            b.state_reward(s, (s + 1) as f64);
        }
        b.build().unwrap()
    }

    #[test]
    fn fixed_zero_is_one_step() {
        let m = chain(StoppingModel::Fixed { horizon: 0 });
        let tr = sample_trajectory(&m, &Constant(0), 1).unwrap();
        assert_eq!(tr.steps.len(), 1);
        assert_eq!(tr.horizon(), 0);
        assert_eq!(tr.terminal, 1);
    }

    #[test]
    fn deterministic_chain_run() {
        let m = chain(StoppingModel::Fixed { horizon: 2 });
        let tr = sample_trajectory(&m, &Constant(0), 7).unwrap();
        assert_eq!(tr.states().collect::<Vec<_>>(), [0, 1, 2]);
        assert_eq!(tr.total_reward(), 1.0 + 2.0 + 3.0);
        assert_eq!(tr.terminal, 2);
    }

    #[test]
    fn seeds_are_reproducible() {
        let m = chain(StoppingModel::Geometric { gamma: 0.8 });
        let a = sample_trajectory(&m, &Uniform(2), 99).unwrap();
        let b = sample_trajectory(&m, &Uniform(2), 99).unwrap();
        assert_eq!(a, b);
        assert_ne!(mix_seed(1, 0), mix_seed(1, 1));
        assert_ne!(mix_seed(0, 1), mix_seed(1, 0));
    }

    #[test]
    fn full_observability_gives_point_beliefs() {
        struct Check;
        impl Policy for Check {
            fn act(&self, b: &Belief, _: usize, rng: &mut SimRng) -> Result<usize, PolicyError> {
                assert_eq!(b.support().count(), 1);
                Ok(rng.gen_range(0..2))
            }
        }
        let m = chain(StoppingModel::Geometric { gamma: 0.9 });
        for seed in 0..200 {
            sample_trajectory(&m, &Check, seed).unwrap();
        }
    }

    #[test]
    fn geometric_horizon_distribution() {
        let gamma = 0.9;
        let m = chain(StoppingModel::Geometric { gamma });
        let n = 100_000;
        let mut counts = [0usize; 6];
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for i in 0..n {
            let t = sample_trajectory(&m, &Constant(1), mix_seed(5, i)).unwrap().horizon();
            if t < 6 {
                counts[t] += 1;
            }
            sum += t as f64;
            sum_sq += (t * t) as f64;
        }
        let nf = n as f64;
        let mean = sum / nf;
        let se = ((sum_sq / nf - mean * mean) / nf).sqrt();
        let expected = gamma / (1.0 - gamma);
        assert!((mean - expected).abs() < 3.0 * se, "mean {mean} vs {expected} (se {se})");
        for (t, &c) in counts.iter().enumerate() {
            let p = (1.0 - gamma) * gamma.powi(t as i32);
            let se = (p * (1.0 - p) / nf).sqrt();
            assert!((c as f64 / nf - p).abs() < 3.0 * se, "P[T={t}]");
        }
    }
}
