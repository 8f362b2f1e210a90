use rand::seq::SliceRandom;
use rand::SeedableRng;
use rayon::prelude::*;

use super::{
    backup, check_reward, initial_posteriors, AlphaPolicy, AlphaVector, Solution, SolveStats,
    SolverConfig, SolverError,
};
use crate::pomdp::{predict, Belief, DiscretePomdp, SimRng};

const ORACLE_LIMIT: f64 = 1e7;

/// Beliefs reachable at stages `0..=horizon`, generated forward from the
/// first-observation posteriors. Stages larger than `cfg.n_beliefs` are
/// subsampled with `cfg.expansion_seed`.
pub fn reachable_beliefs<M: DiscretePomdp + ?Sized>(
    m: &M,
    horizon: usize,
    cfg: &SolverConfig,
) -> Vec<Vec<Belief>> {
    let mut rng = SimRng::seed_from_u64(cfg.expansion_seed);
    let mut stages: Vec<Vec<Belief>> = Vec::with_capacity(horizon + 1);
    let mut current: Vec<Belief> = Vec::new();
    for (b, _) in initial_posteriors(m) {
        push_new(&mut current, b);
    }
    for t in 0..=horizon {
        if current.len() > cfg.n_beliefs {
            current.shuffle(&mut rng);
            current.truncate(cfg.n_beliefs);
        }
        if t < horizon {
            let mut next = Vec::new();
            for b in &current {
                for a in 0..m.n_actions() {
                    let eta = predict(m, b, a);
                    for o in 0..m.n_obs() {
                        if let Ok((b2, _)) = Belief::condition(m, &eta, o) {
                            push_new(&mut next, b2);
                        }
                    }
                }
            }
            stages.push(std::mem::replace(&mut current, next));
        } else {
            stages.push(std::mem::take(&mut current));
        }
    }
    stages
}

fn push_new(set: &mut Vec<Belief>, b: Belief) {
    if !set.iter().any(|c| c.l1_distance(&b) < 1e-12) {
        set.push(b);
    }
}

/// Backward induction over `t = horizon..=0` with point-based backups on
/// forward-reachable beliefs. `terminal` is collected on `X_{T+1}`.
pub fn solve_finite_horizon<M: DiscretePomdp + ?Sized>(
    m: &M,
    reward: &[f64],
    terminal: Option<&[f64]>,
    horizon: usize,
    cfg: &SolverConfig,
) -> Result<Solution, SolverError> {
    check_reward(m, reward)?;
    cfg.validate()?;
    let n = m.n_states();
    if let Some(f) = terminal {
        if f.len() != n {
            return Err(SolverError::RewardShape {
                expected: n,
                got: f.len(),
            });
        }
    }
    let beliefs = reachable_beliefs(m, horizon, cfg);
    let mut next = vec![AlphaVector {
        action: 0,
        values: terminal.map_or_else(|| vec![0.0; n], <[f64]>::to_vec),
    }];
    let mut stages: Vec<Vec<AlphaVector>> = vec![Vec::new(); horizon + 1];
    for t in (0..=horizon).rev() {
        let backed: Vec<AlphaVector> = beliefs[t]
            .par_iter()
            .map(|b| backup(m, reward, 1.0, &next, 0, b).0)
            .collect();
        let mut set: Vec<AlphaVector> = Vec::new();
        for v in backed {
            if !set.contains(&v) {
                set.push(v);
            }
        }
        stages[t] = set.clone();
        next = set;
    }
    let n_beliefs = beliefs.iter().map(Vec::len).sum();
    let policy = AlphaPolicy::TimeIndexed {
        horizon,
        n_states: n,
        stages,
    };
    let value = policy.initial_value(m);
    Ok(Solution {
        stats: SolveStats {
            converged: true,
            rounds: horizon + 1,
            n_beliefs,
            n_vectors: policy.n_vectors(),
            residual: 0.0,
        },
        policy,
        value,
    })
}

/// Optimal expected `Σ_{t≤T} reward + terminal(X_{T+1})` by full recursion
/// over action/observation histories.
pub fn exact_value_oracle<M: DiscretePomdp + ?Sized>(
    m: &M,
    reward: &[f64],
    terminal: Option<&[f64]>,
    horizon: usize,
) -> Result<f64, SolverError> {
    check_reward(m, reward)?;
    let histories = (m.n_obs() as f64)
        * ((m.n_actions() * m.n_obs()) as f64).powi(horizon as i32 + 1);
    if histories > ORACLE_LIMIT {
        return Err(SolverError::TooLarge(histories));
    }
    let zero = vec![0.0; m.n_states()];
    let f = terminal.unwrap_or(&zero);
    Ok(initial_posteriors(m)
        .iter()
        .map(|(b, p)| p * oracle_value(m, reward, f, b, 0, horizon))
        .sum())
}

fn oracle_value<M: DiscretePomdp + ?Sized>(
    m: &M,
    reward: &[f64],
    terminal: &[f64],
    b: &Belief,
    t: usize,
    horizon: usize,
) -> f64 {
    let na = m.n_actions();
    (0..na)
        .map(|a| {
            let now: f64 = b.support().map(|(x, p)| p * reward[x * na + a]).sum();
            let eta = predict(m, b, a);
            let future: f64 = if t == horizon {
                eta.iter().zip(terminal).map(|(p, f)| p * f).sum()
            } else {
                (0..m.n_obs())
                    .filter_map(|o| Belief::condition(m, &eta, o).ok())
                    .map(|(b2, po)| po * oracle_value(m, reward, terminal, &b2, t + 1, horizon))
                    .sum()
            };
            now + future
        })
        .fold(f64::NEG_INFINITY, f64::max)
}
