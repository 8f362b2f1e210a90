mod common;

use ltlf_cpomdp::pomdp::{Belief, DiscretePomdp, LabeledPomdp, StoppingModel};
use ltlf_cpomdp::solver::{
    best_vector, exact_value_oracle, expand_beliefs, solve_discounted, solve_discounted_on,
    solve_finite_horizon, AlphaPolicy, SolverConfig,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rewards(m: &LabeledPomdp) -> Vec<f64> {
    let na = m.n_actions();
    (0..m.n_states() * na).map(|i| m.reward(i / na, i % na)).collect()
}

fn discounted(seed: u64, n: usize) -> LabeledPomdp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    common::random_pomdp(&mut rng, n, 1)
        .with_stopping(StoppingModel::Geometric { gamma: 0.9 })
        .unwrap()
}

fn vectors(p: &AlphaPolicy) -> &[ltlf_cpomdp::solver::AlphaVector] {
    match p {
        AlphaPolicy::Stationary { vectors, .. } => vectors,
        AlphaPolicy::TimeIndexed { .. } => panic!("expected a stationary policy"),
    }
}

/// Optimal values of the fully observed MDP, an upper bound for any
/// belief-based policy.
fn mdp_values(m: &LabeledPomdp, gamma: f64) -> Vec<f64> {
    let mut v = vec![0.0; m.n_states()];
    for _ in 0..2000 {
        v = (0..m.n_states())
            .map(|s| {
                (0..m.n_actions())
                    .map(|a| {
                        m.reward(s, a)
                            + gamma * m.transitions(s, a).iter().map(|&(t, p)| p * v[t]).sum::<f64>()
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
    }
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn finite_horizon_matches_the_oracle(seed in any::<u64>(), n in 1usize..=4, horizon in 0usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = common::random_pomdp(&mut rng, n, horizon);
        let r = rewards(&m);
        let terminal: Vec<f64> = (0..n).map(|s| (s % 2) as f64).collect();
        let cfg = SolverConfig { n_beliefs: 1_000_000, ..SolverConfig::default() };
        let sol = solve_finite_horizon(&m, &r, Some(&terminal), horizon, &cfg).unwrap();
        let exact = exact_value_oracle(&m, &r, Some(&terminal), horizon).unwrap();
        prop_assert!((sol.value - exact).abs() < 1e-9, "{} vs {}", sol.value, exact);
    }

    #[test]
    fn discounted_vectors_respect_bounds(seed in any::<u64>(), n in 1usize..=4) {
        let m = discounted(seed, n);
        let r = rewards(&m);
        let lo = r.iter().cloned().fold(f64::INFINITY, f64::min) / 0.1;
        let hi = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / 0.1;
        let cfg = SolverConfig { n_beliefs: 64, ..SolverConfig::default() };
        let sol = solve_discounted(&m, &r, 0.9, &cfg).unwrap();
        for v in vectors(&sol.policy) {
            for &x in &v.values {
                prop_assert!(x >= lo - 1e-9 && x <= hi + 1e-9);
            }
        }
        let upper = mdp_values(&m, 0.9);
        for b in expand_beliefs(&m, &cfg) {
            prop_assert!(best_vector(vectors(&sol.policy), &b).1 <= b.dot(&upper) + 1e-6);
        }
    }

    #[test]
    fn more_rounds_never_lower_belief_values(seed in any::<u64>(), n in 2usize..=4, rounds in 1usize..6) {
        let m = discounted(seed, n);
        let r = rewards(&m);
        let base = SolverConfig { n_beliefs: 32, ..SolverConfig::default() };
        let beliefs = expand_beliefs(&m, &base);
        let short = SolverConfig { max_backup_rounds: rounds, ..base.clone() };
        let long = SolverConfig { max_backup_rounds: rounds + 3, ..base };
        let a = solve_discounted_on(&m, &r, 0.9, &short, &beliefs).unwrap();
        let b = solve_discounted_on(&m, &r, 0.9, &long, &beliefs).unwrap();
        for bel in &beliefs {
            let va = best_vector(vectors(&a.policy), bel).1;
            let vb = best_vector(vectors(&b.policy), bel).1;
            prop_assert!(vb >= va - 1e-12, "{vb} < {va}");
        }
    }
}

#[test]
fn discounted_solves_are_deterministic() {
    let m = ltlf_cpomdp::bench::make_model("M8").unwrap();
    let r = rewards(&m);
    let cfg = SolverConfig {
        n_beliefs: 64,
        expansion_seed: 3,
        ..SolverConfig::default()
    };
    let a = solve_discounted(&m, &r, 0.99, &cfg).unwrap();
    let b = solve_discounted(&m, &r, 0.99, &cfg).unwrap();
    assert_eq!(a.policy, b.policy);
    assert_eq!(a.stats, b.stats);
}

#[test]
fn dominating_action_is_chosen_at_a_point_belief() {
    // Action x pays 1 in s0, y pays nothing; everything else is symmetric.
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let m = common::random_pomdp(&mut rng, 2, 0);
    let mut r = vec![0.0; 4];
    r[0] = 1.0;
    let sol = solve_finite_horizon(&m, &r, None, 0, &SolverConfig::default()).unwrap();
    assert_eq!(sol.policy.policy_action(&Belief::point(2, 0), 0).unwrap(), 0);
}
