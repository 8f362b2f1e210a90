use std::collections::{HashMap, VecDeque};

use super::progress::{Canonicalizer, Key};
use super::{minimize_dfa, Dfa, DfaError};
use crate::ltlf::{LtlfFormula, Letter};

#[derive(Debug, Clone, Copy)]
pub struct CompileOptions {
    pub max_atoms: usize,
    /// Budget on states discovered before minimization.
    pub max_states: usize,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            max_atoms: 8,
            max_states: 10_000,
        }
    }
}

/// Progression automaton of `formula`: states are canonical obligations,
/// discovered breadth-first from the formula itself. Not minimized.
pub fn compile_dfa(formula: &LtlfFormula, opts: CompileOptions) -> Result<Dfa, DfaError> {
    let alphabet = &formula.alphabet;
    if alphabet.len() > opts.max_atoms {
        return Err(DfaError::TooManyAtoms {
            atoms: alphabet.len(),
            limit: opts.max_atoms,
        });
    }
    let k = alphabet.letter_count();
    let mut canon = Canonicalizer::for_formula(&formula.formula);
    // var_progress[letter][var]
    let mut var_progress: Vec<Vec<Key>> = vec![Vec::new(); k];

    let start = canon.key(&formula.formula);
    let mut index: HashMap<Key, usize> = HashMap::from([(start, 0)]);
    let mut states = vec![start];
    let mut queue = VecDeque::from([start]);
    let mut delta: Vec<usize> = Vec::new();

    while let Some(key) = queue.pop_front() {
        for (l, vp) in var_progress.iter_mut().enumerate() {
            let letter = Letter(l as u32);
            while vp.len() < canon.variables().len() {
                let v = canon.variables()[vp.len()].clone();
                let p = super::progress_once(&v, alphabet, letter);
                let pk = canon.key(&p);
                vp.push(pk);
            }
            let mut memo = HashMap::new();
            let next = canon.progress(key, vp, &mut memo);
            let id = match index.get(&next) {
                Some(&id) => id,
                None => {
                    let id = states.len();
                    if id >= opts.max_states {
                        return Err(DfaError::StateBudget {
                            limit: opts.max_states,
                        });
                    }
                    index.insert(next, id);
                    states.push(next);
                    queue.push_back(next);
                    id
                }
            };
            delta.push(id);
        }
    }

    let mut memo = HashMap::new();
    let accepting = states
        .iter()
        .map(|&s| canon.empty_accept(s, &mut memo))
        .collect();
    let annotations = states
        .iter()
        .map(|&s| canon.to_formula(s).to_string())
        .collect();
    Dfa::new(formula.to_string(), alphabet.clone(), 0, accepting, delta)?
        .with_annotations(annotations)
}

/// [`compile_dfa`] followed by [`minimize_dfa`].
pub fn compile_minimal_dfa(formula: &LtlfFormula, opts: CompileOptions) -> Result<Dfa, DfaError> {
    Ok(minimize_dfa(&compile_dfa(formula, opts)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltlf::{parse_formula, AtomSource};

    fn compile(s: &str) -> Dfa {
        compile_dfa(&parse_formula(s, AtomSource::Infer).unwrap(), CompileOptions::default())
            .unwrap()
    }

    #[test]
    fn eventually_has_two_states() {
        let d = compile("F a");
        assert_eq!(d.n_states(), 2);
        assert_eq!(d.initial(), 0);
        assert!(!d.is_accepting(0));
        assert_eq!(d.next(0, Letter(0)), 0);
        assert_eq!(d.next(0, Letter(1)), 1);
        assert!(d.is_accepting(1));
        assert_eq!(d.next(1, Letter(0)), 1);
        assert_eq!(d.next(1, Letter(1)), 1);
        assert_eq!(d.annotations().unwrap()[0], "F a");
    }

    #[test]
    fn true_is_one_accepting_sink() {
        let d = compile("true");
        assert_eq!(d.n_states(), 1);
        assert!(d.is_accepting(0));
        assert_eq!(d.next(0, Letter(0)), 0);
    }

    #[test]
    fn reach_avoid_minimizes_to_three_states() {
        let raw = compile("F a & G !b");
        let min = minimize_dfa(&raw);
        assert_eq!(min.n_states(), 3);
    }

    #[test]
    fn atom_and_state_budgets() {
        let many = (0..9).map(|i| format!("p{i}")).collect::<Vec<_>>().join(" & ");
        let f = parse_formula(&many, AtomSource::Infer).unwrap();
        assert!(matches!(
            compile_dfa(&f, CompileOptions::default()),
            Err(DfaError::TooManyAtoms { atoms: 9, limit: 8 })
        ));
        let f = parse_formula("F (a & F (b & F c))", AtomSource::Infer).unwrap();
        let tight = CompileOptions { max_atoms: 8, max_states: 2 };
        assert!(matches!(
            compile_dfa(&f, tight),
            Err(DfaError::StateBudget { limit: 2 })
        ));
    }
}
