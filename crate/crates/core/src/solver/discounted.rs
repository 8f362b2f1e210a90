use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use super::{
    backup, best_vector, check_reward, initial_posteriors, AlphaPolicy, AlphaVector, Solution, SolveStats,
    SolverConfig, SolverError,
};
use crate::pomdp::{belief_update, predict, sample_sparse, Belief, DiscretePomdp, SimRng, StoppingModel};

/// Belief set from random-action walks. Walks start at the posteriors of
/// the first observation and end with the model's stopping rule.
pub fn expand_beliefs<M: DiscretePomdp + ?Sized>(m: &M, cfg: &SolverConfig) -> Vec<Belief> {
    let starts: Vec<Belief> = initial_posteriors(m).into_iter().map(|(b, _)| b).collect();
    let mut set: Vec<Belief> = Vec::new();
    for b in &starts {
        if set.len() < cfg.n_beliefs && !set.iter().any(|c| c == b) {
            set.push(b.clone());
        }
    }
    let mut rng = SimRng::seed_from_u64(cfg.expansion_seed);
    let continue_prob = match m.stopping() {
        StoppingModel::Geometric { gamma } => gamma,
        StoppingModel::Fixed { horizon } => horizon as f64 / (horizon as f64 + 1.0),
    };
    let budget = cfg.n_beliefs.saturating_mul(200);
    let mut steps = 0;
    while set.len() < cfg.n_beliefs && steps < budget {
        let mut b = starts[rng.gen_range(0..starts.len())].clone();
        loop {
            steps += 1;
            let a = rng.gen_range(0..m.n_actions());
            let probs = b.probs();
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut x = 0;
            for (i, &p) in probs.iter().enumerate() {
                if p > 0.0 {
                    x = i;
                    acc += p;
                    if u < acc {
                        break;
                    }
                }
            }
            let y = sample_sparse(m.transitions(x, a), &mut rng);
            let o = sample_sparse(m.observations(y), &mut rng);
            b = belief_update(m, &b, a, o).expect("sampled observation has positive probability");
            if set.iter().all(|c| c.l1_distance(&b) > cfg.expansion_threshold) {
                set.push(b.clone());
                if set.len() >= cfg.n_beliefs {
                    break;
                }
            }
            if steps >= budget || rng.gen::<f64>() >= continue_prob {
                break;
            }
        }
    }
    set
}

fn bits(v: &AlphaVector) -> (usize, Vec<u64>) {
    (v.action, v.values.iter().map(|x| x.to_bits()).collect())
}

/// Point-based value iteration for the discounted objective
/// `E Σ_t γ^t reward(X_t, A_t)`. Vectors start at the uniform lower bound
/// `min reward / (1 - γ)`; a belief keeps its previous vector whenever the
/// new backup does not improve it.
pub fn solve_discounted<M: DiscretePomdp + ?Sized>(
    m: &M,
    reward: &[f64],
    gamma: f64,
    cfg: &SolverConfig,
) -> Result<Solution, SolverError> {
    cfg.validate()?;
    let beliefs = expand_beliefs(m, cfg);
    solve_discounted_on(m, reward, gamma, cfg, &beliefs)
}

/// [`solve_discounted`] on a given belief set, e.g. one reused across
/// several reward functions.
pub fn solve_discounted_on<M: DiscretePomdp + ?Sized>(
    m: &M,
    reward: &[f64],
    gamma: f64,
    cfg: &SolverConfig,
    beliefs: &[Belief],
) -> Result<Solution, SolverError> {
    let n = m.n_states();
    let floor = reward.iter().copied().fold(f64::INFINITY, f64::min) / (1.0 - gamma);
    let init = vec![AlphaVector {
        action: 0,
        values: vec![floor; n],
    }];
    solve_discounted_warm(m, reward, gamma, cfg, beliefs, init)
}

/// [`solve_discounted_on`] starting from `init` instead of the uniform
/// floor. Every vector in `init` must be a lower bound on the optimal value
/// for `reward`, e.g. a previous solution for a pointwise smaller reward.
pub fn solve_discounted_warm<M: DiscretePomdp + ?Sized>(
    m: &M,
    reward: &[f64],
    gamma: f64,
    cfg: &SolverConfig,
    beliefs: &[Belief],
    init: Vec<AlphaVector>,
) -> Result<Solution, SolverError> {
    check_reward(m, reward)?;
    cfg.validate()?;
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(SolverError::Discount(gamma));
    }
    let n = m.n_states();
    if beliefs.is_empty() || beliefs.iter().any(|b| b.len() != n) {
        return Err(SolverError::Config("belief set does not match the model".into()));
    }
    if init.is_empty() || init.iter().any(|v| v.values.len() != n || v.action >= m.n_actions()) {
        return Err(SolverError::Config("initial vectors do not match the model".into()));
    }
    let mut vectors = init;
    // Vector index and value per belief.
    let mut owner: Vec<(usize, f64)> = beliefs.iter().map(|b| best_vector(&vectors, b)).collect();
    let mut rounds = 0;
    let mut residual = f64::INFINITY;
    while rounds < cfg.max_backup_rounds {
        rounds += 1;
        let fallback = fallback_index(&vectors);
        let backed: Vec<(AlphaVector, f64)> = beliefs
            .par_iter()
            .map(|b| backup(m, reward, gamma, &vectors, fallback, b))
            .collect();
        let start: Vec<f64> = owner.iter().map(|o| o.1).collect();
        let candidates = backed.into_iter().map(Some).collect();
        let (v, o) = merge(&vectors, &owner, candidates);
        // Evaluate the greedy controller of the merged set and keep its
        // vectors wherever they do better.
        let evaluated = evaluate_controller(m, reward, gamma, &v, &o, beliefs, cfg.bellman_tolerance);
        let candidates = o
            .iter()
            .zip(beliefs)
            .map(|(&(i, _), b)| {
                let w = evaluated[i].clone();
                let val = w.dot(b);
                Some((w, val))
            })
            .collect();
        let (v, o) = merge(&v, &o, candidates);
        vectors = v;
        owner = o;
        residual = owner
            .iter()
            .zip(&start)
            .map(|(o, s)| o.1 - s)
            .fold(0.0, f64::max);
        if residual < cfg.bellman_tolerance {
            break;
        }
    }
    let converged = residual < cfg.bellman_tolerance;
    let policy = AlphaPolicy::Stationary {
        gamma,
        n_states: n,
        vectors,
    };
    let value = policy.initial_value(m);
    Ok(Solution {
        stats: SolveStats {
            converged,
            rounds,
            n_beliefs: beliefs.len(),
            n_vectors: policy.n_vectors(),
            residual,
        },
        policy,
        value,
    })
}

/// Per belief, keeps the candidate when it does not lower the belief's
/// value and the current vector otherwise; duplicates are merged.
fn merge(
    vectors: &[AlphaVector],
    owner: &[(usize, f64)],
    candidates: Vec<Option<(AlphaVector, f64)>>,
) -> (Vec<AlphaVector>, Vec<(usize, f64)>) {
    let mut next: Vec<AlphaVector> = Vec::new();
    let mut seen: HashMap<(usize, Vec<u64>), usize> = HashMap::new();
    let mut next_owner = Vec::with_capacity(owner.len());
    for (cand, &(old_i, old_val)) in candidates.into_iter().zip(owner) {
        let (v, val) = match cand {
            Some((v, val)) if val >= old_val => (v, val),
            _ => (vectors[old_i].clone(), old_val),
        };
        let idx = *seen.entry(bits(&v)).or_insert_with(|| {
            next.push(v);
            next.len() - 1
        });
        next_owner.push((idx, val));
    }
    (next, next_owner)
}

const EVAL_SWEEPS: usize = 20_000;

/// Exact values of the controller whose node `i` plays `vectors[i].action`
/// and moves, on observation `o`, to the best vector at the successor of a
/// belief owning node `i`.
fn evaluate_controller<M: DiscretePomdp + ?Sized>(
    m: &M,
    reward: &[f64],
    gamma: f64,
    vectors: &[AlphaVector],
    owner: &[(usize, f64)],
    beliefs: &[Belief],
    tolerance: f64,
) -> Vec<AlphaVector> {
    let na = m.n_actions();
    let no = m.n_obs();
    let fallback = fallback_index(vectors);
    let mut witness: Vec<Option<usize>> = vec![None; vectors.len()];
    for (k, &(i, _)) in owner.iter().enumerate() {
        witness[i].get_or_insert(k);
    }
    let successors: Vec<Vec<usize>> = vectors
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            let mut next = vec![fallback; no];
            if let Some(k) = witness[i] {
                let eta = predict(m, &beliefs[k], v.action);
                for (o, slot) in next.iter_mut().enumerate() {
                    if let Ok((b2, _)) = Belief::condition(m, &eta, o) {
                        *slot = best_vector(vectors, &b2).0;
                    }
                }
            }
            next
        })
        .collect();
    // Gauss-Seidel sweeps with self-loops solved in place.
    let mut w: Vec<Vec<f64>> = vectors.iter().map(|v| v.values.clone()).collect();
    let stop = tolerance * (1.0 - gamma);
    let backup_at = |w: &[Vec<f64>], i: usize, x: usize| -> (f64, f64) {
        let a = vectors[i].action;
        let succ = &successors[i];
        let mut future = 0.0;
        let mut self_loop = 0.0;
        for &(y, p) in m.transitions(x, a) {
            for &(o, z) in m.observations(y) {
                if succ[o] == i && y == x {
                    self_loop += p * z;
                } else {
                    future += p * z * w[succ[o]][y];
                }
            }
        }
        (reward[x * na + a] + gamma * future, gamma * self_loop)
    };
    for _ in 0..EVAL_SWEEPS {
        let mut delta: f64 = 0.0;
        for i in 0..vectors.len() {
            for x in 0..w[i].len() {
                let (rest, self_loop) = backup_at(&w, i, x);
                let val = rest / (1.0 - self_loop);
                delta = delta.max((val - w[i][x]).abs());
                w[i][x] = val;
            }
        }
        if delta <= stop {
            break;
        }
    }
    // The controller value is at least `W + min(TW - W) / (1 - γ)`.
    let mut low = f64::INFINITY;
    for i in 0..vectors.len() {
        for x in 0..w[i].len() {
            let (rest, self_loop) = backup_at(&w, i, x);
            low = low.min(rest + self_loop * w[i][x] - w[i][x]);
        }
    }
    let shift = low / (1.0 - gamma);
    for row in &mut w {
        for v in row.iter_mut() {
            *v += shift;
        }
    }
    vectors
        .iter()
        .zip(w)
        .map(|(v, values)| AlphaVector { action: v.action, values })
        .collect()
}

// Vector used for observations that cannot occur from the backed-up belief.
fn fallback_index(vectors: &[AlphaVector]) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in vectors.iter().enumerate() {
        let s: f64 = v.values.iter().sum();
        if s > best.1 {
            best = (i, s);
        }
    }
    best.0
}
