//! Reference semantics on finite words.
//!
//! Each subformula is evaluated once per position; temporal operators use
//! their quantifier definitions directly (no expansion laws), so this module
//! stays an independent oracle for the automaton construction.

use thiserror::Error;

use super::{Alphabet, Formula, Letter};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("cannot evaluate a formula on the empty word")]
    EmptyWord,
    #[error("position {index} out of range for a word of length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("atom {0:?} is not part of the alphabet")]
    UnknownAtom(String),
}

/// Returns whether `w, i ⊨ φ`.
pub fn evaluate_trace(
    formula: &Formula,
    alphabet: &Alphabet,
    word: &[Letter],
    i: usize,
) -> Result<bool, EvalError> {
    if word.is_empty() {
        return Err(EvalError::EmptyWord);
    }
    if i >= word.len() {
        return Err(EvalError::IndexOutOfRange {
            index: i,
            len: word.len(),
        });
    }
    Ok(truth_table(formula, alphabet, word)?[i])
}

/// Whole-word satisfaction, `w ⊨ φ` iff `w, 0 ⊨ φ`.
pub fn satisfies(formula: &Formula, alphabet: &Alphabet, word: &[Letter]) -> Result<bool, EvalError> {
    evaluate_trace(formula, alphabet, word, 0)
}

// Truth value of `formula` at every position of `word`.
fn truth_table(formula: &Formula, alphabet: &Alphabet, word: &[Letter]) -> Result<Vec<bool>, EvalError> {
    use Formula as F;
    let n = word.len();
    let sub = |f: &Formula| truth_table(f, alphabet, word);
    let v = match formula {
        F::True => vec![true; n],
        F::False => vec![false; n],
        F::Atom(a) => {
            let idx = alphabet
                .index_of(a.as_str())
                .ok_or_else(|| EvalError::UnknownAtom(a.as_str().to_string()))?;
            word.iter().map(|l| l.contains(idx)).collect()
        }
        F::Not(f) => sub(f)?.into_iter().map(|x| !x).collect(),
        F::And(l, r) => zip(sub(l)?, sub(r)?, |x, y| x && y),
        F::Or(l, r) => zip(sub(l)?, sub(r)?, |x, y| x || y),
        F::Implies(l, r) => zip(sub(l)?, sub(r)?, |x, y| !x || y),
        F::Next(f) => {
            let s = sub(f)?;
            (0..n).map(|i| i + 1 < n && s[i + 1]).collect()
        }
        // N φ ≡ ¬X¬φ
        F::WeakNext(f) => {
            let s = sub(f)?;
            (0..n).map(|i| !(i + 1 < n && !s[i + 1])).collect()
        }
        F::Until(l, r) => until(&sub(l)?, &sub(r)?),
        // φ1 R φ2 ≡ ¬(¬φ1 U ¬φ2)
        F::Release(l, r) => {
            let nl: Vec<bool> = sub(l)?.into_iter().map(|x| !x).collect();
            let nr: Vec<bool> = sub(r)?.into_iter().map(|x| !x).collect();
            until(&nl, &nr).into_iter().map(|x| !x).collect()
        }
        F::Eventually(f) => {
            let s = sub(f)?;
            (0..n).map(|i| s[i..].iter().any(|&x| x)).collect()
        }
        F::Always(f) => {
            let s = sub(f)?;
            (0..n).map(|i| s[i..].iter().all(|&x| x)).collect()
        }
    };
    Ok(v)
}

fn zip(a: Vec<bool>, b: Vec<bool>, op: impl Fn(bool, bool) -> bool) -> Vec<bool> {
    a.into_iter().zip(b).map(|(x, y)| op(x, y)).collect()
}

// ∃k, i ≤ k < n: r[k] ∧ ∀j, i ≤ j < k: l[j]
fn until(l: &[bool], r: &[bool]) -> Vec<bool> {
    let n = l.len();
    (0..n)
        .map(|i| {
            // Scan k upward; the prefix condition fails for every larger k
            // once some l[j] is false.
            for k in i..n {
                if r[k] {
                    return true;
                }
                if !l[k] {
                    return false;
                }
            }
            false
        })
        .collect()
}
