//! Deterministic finite automata over `2^AP` and the LTLf compiler.

mod compile;
mod minimize;
mod progress;

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ltlf::{Alphabet, AtomError, Letter};

pub use compile::{compile_dfa, compile_minimal_dfa, CompileOptions};
pub use minimize::minimize_dfa;
pub use progress::{empty_accept, progress, progress_once, Canonicalizer, Key};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DfaError {
    #[error("formula has {atoms} atoms; the compiler supports at most {limit}")]
    TooManyAtoms { atoms: usize, limit: usize },
    #[error("state budget of {limit} exceeded during compilation")]
    StateBudget { limit: usize },
    #[error("letter {letter} outside an alphabet of {letters} letters")]
    LetterOutOfRange { letter: u32, letters: usize },
    #[error("malformed automaton: {0}")]
    Malformed(String),
    #[error(transparent)]
    Atom(#[from] AtomError),
}

/// A complete DFA. State 0 is not special; `initial` names the start.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dfa {
    name: String,
    alphabet: Alphabet,
    initial: usize,
    accepting: Vec<bool>,
    /// Row-major `[state][letter]`.
    delta: Vec<usize>,
    annotations: Option<Vec<String>>,
}

impl Dfa {
    /// Builds and validates an automaton. `delta` is row-major over
    /// `[state][letter]` with `2^|alphabet|` letters per row.
    pub fn new(
        name: impl Into<String>,
        alphabet: Alphabet,
        initial: usize,
        accepting: Vec<bool>,
        delta: Vec<usize>,
    ) -> Result<Self, DfaError> {
        let dfa = Dfa {
            name: name.into(),
            alphabet,
            initial,
            accepting,
            delta,
            annotations: None,
        };
        dfa.validate()?;
        Ok(dfa)
    }

    pub fn with_annotations(mut self, annotations: Vec<String>) -> Result<Self, DfaError> {
        if annotations.len() != self.n_states() {
            return Err(DfaError::Malformed(format!(
                "{} annotations for {} states",
                annotations.len(),
                self.n_states()
            )));
        }
        self.annotations = Some(annotations);
        Ok(self)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Checks totality of `delta`, `q0 < |Q|` and `F ⊆ Q`.
    pub fn validate(&self) -> Result<(), DfaError> {
        let n = self.accepting.len();
        let k = self.alphabet.letter_count();
        if n == 0 {
            return Err(DfaError::Malformed("automaton has no states".into()));
        }
        if self.initial >= n {
            return Err(DfaError::Malformed(format!(
                "initial state {} out of range ({} states)",
                self.initial, n
            )));
        }
        if self.delta.len() != n * k {
            return Err(DfaError::Malformed(format!(
                "transition table has {} entries, expected {}",
                self.delta.len(),
                n * k
            )));
        }
        if let Some(bad) = self.delta.iter().position(|&t| t >= n) {
            return Err(DfaError::Malformed(format!(
                "transition ({}, {}) targets missing state {}",
                bad / k,
                bad % k,
                self.delta[bad]
            )));
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn n_states(&self) -> usize {
        self.accepting.len()
    }

    pub fn n_letters(&self) -> usize {
        self.alphabet.letter_count()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn is_accepting(&self, q: usize) -> bool {
        self.accepting[q]
    }

    pub fn accepting_states(&self) -> Vec<usize> {
        (0..self.n_states()).filter(|&q| self.accepting[q]).collect()
    }

    pub fn annotations(&self) -> Option<&[String]> {
        self.annotations.as_deref()
    }

    /// `δ(q, σ)`. Panics if `letter` is outside the alphabet.
    pub fn next(&self, q: usize, letter: Letter) -> usize {
        self.delta[q * self.n_letters() + letter.0 as usize]
    }

    /// State reached from the initial state after reading `word`.
    pub fn run(&self, word: &[Letter]) -> Result<usize, DfaError> {
        let k = self.n_letters();
        word.iter().try_fold(self.initial, |q, l| {
            if (l.0 as usize) < k {
                Ok(self.delta[q * k + l.0 as usize])
            } else {
                Err(DfaError::LetterOutOfRange {
                    letter: l.0,
                    letters: k,
                })
            }
        })
    }

    /// Acceptance of a finite word; the empty word is accepted iff the
    /// initial state is accepting.
    pub fn accepts(&self, word: &[Letter]) -> Result<bool, DfaError> {
        Ok(self.accepting[self.run(word)?])
    }

    /// States reachable from the initial state, in breadth-first order.
    pub fn reachable_states(&self) -> Vec<usize> {
        let k = self.n_letters();
        let mut seen = vec![false; self.n_states()];
        let mut order = vec![self.initial];
        seen[self.initial] = true;
        let mut head = 0;
        while head < order.len() {
            let q = order[head];
            head += 1;
            for l in 0..k {
                let t = self.delta[q * k + l];
                if !seen[t] {
                    seen[t] = true;
                    order.push(t);
                }
            }
        }
        order
    }

    pub fn to_document(&self) -> DfaDocument {
        let k = self.n_letters();
        DfaDocument {
            name: self.name.clone(),
            atoms: self
                .alphabet
                .atoms()
                .iter()
                .map(|a| a.as_str().to_string())
                .collect(),
            n_states: self.n_states(),
            initial: self.initial,
            accepting: self.accepting_states(),
            delta: self.delta.chunks(k).map(|r| r.to_vec()).collect(),
            annotations: self.annotations.clone(),
        }
    }

    pub fn from_document(doc: &DfaDocument) -> Result<Self, DfaError> {
        let alphabet = Alphabet::from_names(&doc.atoms)?;
        let k = alphabet.letter_count();
        if doc.delta.len() != doc.n_states || doc.delta.iter().any(|r| r.len() != k) {
            return Err(DfaError::Malformed(format!(
                "delta must be {} rows of {} letters",
                doc.n_states, k
            )));
        }
        let mut accepting = vec![false; doc.n_states];
        for &q in &doc.accepting {
            if q >= doc.n_states {
                return Err(DfaError::Malformed(format!(
                    "accepting state {q} out of range"
                )));
            }
            accepting[q] = true;
        }
        let dfa = Dfa::new(
            doc.name.clone(),
            alphabet,
            doc.initial,
            accepting,
            doc.delta.concat(),
        )?;
        match &doc.annotations {
            Some(a) => dfa.with_annotations(a.clone()),
            None => Ok(dfa),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("DFA documents serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, DfaError> {
        let doc: DfaDocument =
            serde_json::from_str(text).map_err(|e| DfaError::Malformed(e.to_string()))?;
        Dfa::from_document(&doc)
    }

    /// Graphviz rendering; parallel edges are merged into one label.
    pub fn to_dot(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "digraph \"{}\" {{", self.name.replace('"', "'"));
        let _ = writeln!(out, "  rankdir=LR;");
        let _ = writeln!(out, "  init [shape=point];");
        for q in 0..self.n_states() {
            let shape = if self.accepting[q] { "doublecircle" } else { "circle" };
            let tooltip = self
                .annotations
                .as_ref()
                .map(|a| format!(", tooltip=\"{}\"", a[q].replace('"', "'")))
                .unwrap_or_default();
            let _ = writeln!(out, "  q{q} [shape={shape}{tooltip}];");
        }
        let _ = writeln!(out, "  init -> q{};", self.initial);
        let k = self.n_letters();
        for q in 0..self.n_states() {
            let mut targets: Vec<(usize, Vec<String>)> = Vec::new();
            for l in 0..k {
                let t = self.delta[q * k + l];
                let names = self.alphabet.names_in(Letter(l as u32));
                let label = format!("{{{}}}", names.join(","));
                match targets.iter_mut().find(|(x, _)| *x == t) {
                    Some((_, v)) => v.push(label),
                    None => targets.push((t, vec![label])),
                }
            }
            for (t, labels) in targets {
                let _ = writeln!(out, "  q{q} -> q{t} [label=\"{}\"];", labels.join(" "));
            }
        }
        out.push_str("}\n");
        out
    }
}

/// On-disk form of a [`Dfa`]. Letter bitmask bit `i` means `atoms[i]` holds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DfaDocument {
    pub name: String,
    pub atoms: Vec<String>,
    pub n_states: usize,
    pub initial: usize,
    pub accepting: Vec<usize>,
    pub delta: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotations: Option<Vec<String>>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eventually_a() -> Dfa {
        let ab = Alphabet::from_names(&["a"]).unwrap();
        Dfa::new("F a", ab, 0, vec![false, true], vec![0, 1, 1, 1]).unwrap()
    }

    #[test]
    fn runs_and_acceptance() {
        let d = eventually_a();
        assert!(d.accepts(&[Letter(1)]).unwrap());
        assert!(!d.accepts(&[Letter(0), Letter(0)]).unwrap());
        assert!(!d.accepts(&[]).unwrap());
        assert_eq!(
            d.accepts(&[Letter(2)]),
            Err(DfaError::LetterOutOfRange { letter: 2, letters: 2 })
        );
    }

    #[test]
    fn validation_rejects_partial_tables() {
        let ab = Alphabet::from_names(&["a"]).unwrap();
        assert!(Dfa::new("x", ab.clone(), 0, vec![true], vec![0]).is_err());
        assert!(Dfa::new("x", ab.clone(), 1, vec![true], vec![0, 0]).is_err());
        assert!(Dfa::new("x", ab, 0, vec![true], vec![0, 3]).is_err());
    }

    #[test]
    fn document_roundtrip_and_dot() {
        let d = eventually_a()
            .with_annotations(vec!["F a".into(), "true".into()])
            .unwrap();
        let back = Dfa::from_json(&d.to_json()).unwrap();
        assert_eq!(back, d);
        let dot = d.to_dot();
        assert!(dot.contains("q1 [shape=doublecircle"));
        assert!(dot.contains("q0 -> q1 [label=\"{a}\"]"));
    }
}
