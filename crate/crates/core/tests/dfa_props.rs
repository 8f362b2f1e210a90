mod common;

use std::collections::HashSet;

use ltlf_cpomdp::dfa::{
    compile_dfa, compile_minimal_dfa, empty_accept, minimize_dfa, progress, CompileOptions, Dfa,
};
use ltlf_cpomdp::ltlf::{evaluate_trace, Letter, LtlfFormula};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const AB: &[&str] = &["a", "b"];

fn arb_dfa() -> impl Strategy<Value = Dfa> {
    (1usize..=6).prop_flat_map(|n| {
        (
            0..n,
            proptest::collection::vec(any::<bool>(), n),
            proptest::collection::vec(0..n, n * 4),
        )
            .prop_map(|(init, acc, delta)| Dfa::new("random", common::ab(), init, acc, delta).unwrap())
    })
}

/// Number of distinct residual languages among reachable states, told apart
/// by every word of length below the state count.
fn residual_classes(d: &Dfa) -> usize {
    let probes = common::all_words(2, 0, d.n_states().saturating_sub(1));
    let mut seen = HashSet::new();
    for q in d.reachable_states() {
        let sig: Vec<bool> = probes
            .iter()
            .map(|w| d.is_accepting(w.iter().fold(q, |q, &l| d.next(q, l))))
            .collect();
        seen.insert(sig);
    }
    seen.len()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn compiled_automata_agree_with_semantics(f in common::arb_formula(AB, 3)) {
        let f = LtlfFormula::new(f, common::ab()).unwrap();
        let raw = compile_dfa(&f, CompileOptions::default()).unwrap();
        let min = compile_minimal_dfa(&f, CompileOptions::default()).unwrap();
        raw.validate().unwrap();
        min.validate().unwrap();
        prop_assert!(min.n_states() <= raw.n_states());
        for w in common::all_words(2, 1, 5) {
            let truth = evaluate_trace(&f.formula, &f.alphabet, &w, 0).unwrap();
            prop_assert_eq!(raw.accepts(&w).unwrap(), truth);
            prop_assert_eq!(min.accepts(&w).unwrap(), truth);
        }
    }

    #[test]
    fn progression_is_sound(f in common::arb_formula(AB, 4), w in common::arb_word(2, 8)) {
        let f = LtlfFormula::new(f, common::ab()).unwrap();
        let rest = progress(&f, w[0]);
        let lhs = evaluate_trace(&f.formula, &f.alphabet, &w, 0).unwrap();
        let rhs = if w.len() == 1 {
            empty_accept(&rest)
        } else {
            evaluate_trace(&rest, &f.alphabet, &w[1..], 0).unwrap()
        };
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn minimization_preserves_language(d in arb_dfa(), seed in any::<u64>()) {
        let m = minimize_dfa(&d);
        m.validate().unwrap();
        prop_assert_eq!(m.initial(), 0);
        for w in common::all_words(2, 0, 6) {
            prop_assert_eq!(m.accepts(&w).unwrap(), d.accepts(&w).unwrap());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..10_000 / 96 + 1 {
            let len = rng.gen_range(7..40);
            let w: Vec<Letter> = (0..len).map(|_| Letter(rng.gen_range(0..4))).collect();
            prop_assert_eq!(m.accepts(&w).unwrap(), d.accepts(&w).unwrap());
        }
    }

    #[test]
    fn minimization_is_minimal_and_idempotent(d in arb_dfa()) {
        let m = minimize_dfa(&d);
        prop_assert_eq!(m.n_states(), residual_classes(&d));
        prop_assert_eq!(minimize_dfa(&m).n_states(), m.n_states());
    }
}

#[test]
fn duplicated_accepting_sink_collapses() {
    // F a over {a}: waiting state 0, accepting sinks 1 and 2.
    let a = ltlf_cpomdp::ltlf::Alphabet::from_names(&["a"]).unwrap();
    let d = Dfa::new("dup", a, 0, vec![false, true, true], vec![0, 1, 2, 1, 1, 2]).unwrap();
    let m = minimize_dfa(&d);
    assert_eq!(m.n_states(), 2);
    for w in common::all_words(1, 0, 5) {
        assert_eq!(m.accepts(&w).unwrap(), d.accepts(&w).unwrap());
    }
}

#[test]
fn long_random_words_agree_for_paper_specs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for name in ltlf_cpomdp::bench::SPEC_NAMES {
        let text = ltlf_cpomdp::bench::make_spec(name).unwrap();
        let f = ltlf_cpomdp::ltlf::parse_formula(text, ltlf_cpomdp::ltlf::AtomSource::Infer).unwrap();
        let raw = compile_dfa(&f, CompileOptions::default()).unwrap();
        let min = minimize_dfa(&raw);
        let k = f.alphabet.letter_count() as u32;
        for _ in 0..2_000 {
            let len = rng.gen_range(1..30);
            let w: Vec<Letter> = (0..len).map(|_| Letter(rng.gen_range(0..k))).collect();
            let truth = evaluate_trace(&f.formula, &f.alphabet, &w, 0).unwrap();
            assert_eq!(min.accepts(&w).unwrap(), truth, "{name} on {w:?}");
            assert_eq!(raw.accepts(&w).unwrap(), truth, "{name} on {w:?}");
        }
    }
}
