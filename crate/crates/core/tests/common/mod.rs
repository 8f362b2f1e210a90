#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ltlf_cpomdp::ltlf::{Alphabet, Formula, Letter};
use ltlf_cpomdp::pomdp::{LabeledPomdp, PomdpBuilder, StoppingModel};

pub fn ab() -> Alphabet {
    Alphabet::from_names(&["a", "b"]).unwrap()
}

/// Random formula over `atoms` with depth at most `depth`.
pub fn random_formula(rng: &mut impl Rng, atoms: &[&str], depth: usize) -> Formula {
    if depth <= 1 || rng.gen_bool(0.2) {
        return match rng.gen_range(0..8) {
            0 => Formula::True,
            1 => Formula::False,
            _ => Formula::atom(atoms[rng.gen_range(0..atoms.len())]),
        };
    }
    let pick = rng.gen_range(0..12);
    let mut sub = || random_formula(rng, atoms, depth - 1);
    match pick {
        0 => Formula::not(sub()),
        1 => Formula::next(sub()),
        2 => Formula::weak_next(sub()),
        3 => Formula::eventually(sub()),
        4 => Formula::always(sub()),
        5 => Formula::and(sub(), sub()),
        6 => Formula::or(sub(), sub()),
        7 => Formula::implies(sub(), sub()),
        8 | 9 => Formula::until(sub(), sub()),
        _ => Formula::release(sub(), sub()),
    }
}

/// `n` formulas from a fixed seed, depth ≤ 4 over `a`, `b`.
pub fn formula_corpus(n: usize, seed: u64) -> Vec<Formula> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_formula(&mut rng, &["a", "b"], 4)).collect()
}

/// Every word of length `min..=max` over `n_atoms` atoms.
pub fn all_words(n_atoms: usize, min: usize, max: usize) -> Vec<Vec<Letter>> {
    let k = 1u32 << n_atoms;
    let mut out = Vec::new();
    let mut layer: Vec<Vec<Letter>> = vec![Vec::new()];
    for len in 0..=max {
        if len >= min {
            out.extend(layer.iter().cloned());
        }
        layer = layer
            .iter()
            .flat_map(|w| {
                (0..k).map(move |l| {
                    let mut w = w.clone();
                    w.push(Letter(l));
                    w
                })
            })
            .collect();
    }
    out
}

/// Two fully observed states, `s1` labelled `a`. Action `stay` keeps the
/// state, `switch` flips it. Staying in `s0` pays `0.17` per step.
pub fn two_state_mdp(gamma: f64) -> LabeledPomdp {
    let mut b = PomdpBuilder::new(
        "two_state",
        vec!["s0".into(), "s1".into()],
        vec!["stay".into(), "switch".into()],
        vec!["o0".into(), "o1".into()],
        Alphabet::from_names(&["a"]).unwrap(),
        StoppingModel::Geometric { gamma },
    )
    .unwrap();
    b.initial(0, 1.0);
    for s in 0..2 {
        b.observe(s, s, 1.0);
        b.transition(s, 0, s, 1.0);
        b.transition(s, 1, 1 - s, 1.0);
    }
    b.label(1, Letter(1));
    b.reward(0, 0, 0.17);
    b.build().unwrap()
}

/// A random POMDP with `n` states, two actions, two observations and
/// atoms `a`, `b`, stopping after `horizon`.
pub fn random_pomdp(rng: &mut impl Rng, n: usize, horizon: usize) -> LabeledPomdp {
    let mut b = PomdpBuilder::new(
        "random",
        (0..n).map(|i| format!("s{i}")).collect(),
        vec!["x".into(), "y".into()],
        vec!["o0".into(), "o1".into()],
        ab(),
        StoppingModel::Fixed { horizon },
    )
    .unwrap();
    let dist = |rng: &mut dyn rand::RngCore, k: usize| -> Vec<f64> {
        let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect()
    };
    for (s, p) in dist(rng, n).into_iter().enumerate() {
        b.initial(s, p);
    }
    for s in 0..n {
        b.label(s, Letter(rng.gen_range(0..4)));
        for (o, p) in dist(rng, 2).into_iter().enumerate() {
            b.observe(s, o, p);
        }
        for a in 0..2 {
            for (t, p) in dist(rng, n).into_iter().enumerate() {
                b.transition(s, a, t, p);
            }
            b.reward(s, a, rng.gen_range(-1.0..1.0));
        }
    }
    b.build().unwrap()
}

/// Formulas over `atoms` with at most `levels` operator levels above the
/// leaves.
pub fn arb_formula(
    atoms: &'static [&'static str],
    levels: u32,
) -> impl proptest::strategy::Strategy<Value = Formula> {
    use proptest::prelude::*;
    let leaf = prop_oneof![
        Just(Formula::True),
        Just(Formula::False),
        proptest::sample::select(atoms).prop_map(Formula::atom),
    ];
    leaf.prop_recursive(levels, 64, 2, |inner| {
        let pair = || (inner.clone(), inner.clone());
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            inner.clone().prop_map(Formula::next),
            inner.clone().prop_map(Formula::weak_next),
            inner.clone().prop_map(Formula::eventually),
            inner.clone().prop_map(Formula::always),
            pair().prop_map(|(l, r)| Formula::and(l, r)),
            pair().prop_map(|(l, r)| Formula::or(l, r)),
            pair().prop_map(|(l, r)| Formula::implies(l, r)),
            pair().prop_map(|(l, r)| Formula::until(l, r)),
            pair().prop_map(|(l, r)| Formula::release(l, r)),
        ]
    })
}

/// A word of `1..=max` letters over `n_atoms` atoms.
pub fn arb_word(n_atoms: usize, max: usize) -> impl proptest::strategy::Strategy<Value = Vec<Letter>> {
    use proptest::prelude::*;
    proptest::collection::vec((0..1u32 << n_atoms).prop_map(Letter), 1..=max)
}
