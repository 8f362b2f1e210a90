//! Finite-trace linear temporal logic.
//!
//! Formulas are plain trees over named atomic propositions. An [`Alphabet`]
//! fixes the lexicographic atom ordering that every downstream bitmask
//! ([`Letter`]) is expressed in.

mod eval;
mod parse;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use eval::{evaluate_trace, satisfies, EvalError};
pub use parse::{parse_formula, AtomSource, ParseError};

/// A formula together with the alphabet its letters are interpreted over.
///
/// Every atom of `formula` is in `alphabet`; the alphabet may contain more.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LtlfFormula {
    pub formula: Formula,
    pub alphabet: Alphabet,
}

impl LtlfFormula {
    pub fn new(formula: Formula, alphabet: Alphabet) -> Result<Self, AtomError> {
        if let Some(a) = formula
            .atoms()
            .into_iter()
            .find(|a| alphabet.index_of(a.as_str()).is_none())
        {
            return Err(AtomError::Unknown(a.0));
        }
        Ok(LtlfFormula { formula, alphabet })
    }

    /// Uses exactly the atoms that occur in `formula`.
    pub fn with_inferred_alphabet(formula: Formula) -> Self {
        let alphabet = Alphabet::new(formula.atoms()).expect("atoms of a formula are distinct");
        LtlfFormula { formula, alphabet }
    }
}

impl fmt::Display for LtlfFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.formula.fmt(f)
    }
}

/// Maximum number of atoms a [`Letter`] bitmask can address.
pub const MAX_ATOMS: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AtomError {
    #[error("invalid atom name {0:?}: expected [a-z][a-z0-9_]*")]
    InvalidName(String),
    #[error("atom {0:?} declared twice")]
    Duplicate(String),
    #[error("too many atoms ({0}); at most {MAX_ATOMS} are supported")]
    TooMany(usize),
    #[error("atom {0:?} is not part of the alphabet")]
    Unknown(String),
}

/// An atomic proposition name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Atom(String);

impl Atom {
    pub fn new(name: impl Into<String>) -> Result<Self, AtomError> {
        let name = name.into();
        if is_identifier(&name) && !is_keyword(&name) {
            Ok(Atom(name))
        } else {
            Err(AtomError::InvalidName(name))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Atom {
    type Error = AtomError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Atom::new(value)
    }
}

impl From<Atom> for String {
    fn from(atom: Atom) -> String {
        atom.0
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

fn is_keyword(s: &str) -> bool {
    s == "true" || s == "false"
}

/// Ordered, duplicate-free set of atoms. Bit `i` of a [`Letter`] refers to
/// the `i`-th atom in lexicographic order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Atom>", into = "Vec<Atom>")]
pub struct Alphabet {
    atoms: Vec<Atom>,
}

impl Alphabet {
    /// Builds an alphabet from atoms in any order. Duplicates are rejected.
    pub fn new(atoms: impl IntoIterator<Item = Atom>) -> Result<Self, AtomError> {
        let mut atoms: Vec<Atom> = atoms.into_iter().collect();
        atoms.sort();
        if let Some(w) = atoms.windows(2).find(|w| w[0] == w[1]) {
            return Err(AtomError::Duplicate(w[0].0.clone()));
        }
        if atoms.len() > MAX_ATOMS {
            return Err(AtomError::TooMany(atoms.len()));
        }
        Ok(Alphabet { atoms })
    }

    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self, AtomError> {
        let atoms = names
            .iter()
            .map(|n| Atom::new(n.as_ref()))
            .collect::<Result<Vec<_>, _>>()?;
        Alphabet::new(atoms)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.atoms.binary_search_by(|a| a.as_str().cmp(name)).ok()
    }

    /// Number of letters, `2^|AP|`.
    pub fn letter_count(&self) -> usize {
        1usize << self.atoms.len()
    }

    pub fn letters(&self) -> impl Iterator<Item = Letter> {
        (0..self.letter_count() as u32).map(Letter)
    }

    /// Builds the letter containing exactly the named atoms.
    pub fn letter<S: AsRef<str>>(&self, names: &[S]) -> Result<Letter, AtomError> {
        let mut bits = 0u32;
        for n in names {
            let i = self
                .index_of(n.as_ref())
                .ok_or_else(|| AtomError::Unknown(n.as_ref().to_string()))?;
            bits |= 1 << i;
        }
        Ok(Letter(bits))
    }

    pub fn contains_letter(&self, letter: Letter) -> bool {
        (letter.0 as u64) < (1u64 << self.atoms.len())
    }

    /// Names of the atoms present in `letter`, in alphabet order.
    pub fn names_in(&self, letter: Letter) -> Vec<&str> {
        self.atoms
            .iter()
            .enumerate()
            .filter(|(i, _)| letter.contains(*i))
            .map(|(_, a)| a.as_str())
            .collect()
    }

    pub fn is_superset_of(&self, other: &Alphabet) -> bool {
        other.atoms.iter().all(|a| self.index_of(a.as_str()).is_some())
    }
}

impl TryFrom<Vec<Atom>> for Alphabet {
    type Error = AtomError;
    fn try_from(value: Vec<Atom>) -> Result<Self, Self::Error> {
        Alphabet::new(value)
    }
}

impl From<Alphabet> for Vec<Atom> {
    fn from(a: Alphabet) -> Vec<Atom> {
        a.atoms
    }
}

/// The set of atoms true at one trace position, as a bitmask over an
/// [`Alphabet`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Letter(pub u32);

impl Letter {
    pub const EMPTY: Letter = Letter(0);

    pub fn contains(self, atom_index: usize) -> bool {
        self.0 >> atom_index & 1 == 1
    }

    pub fn bits(self) -> u32 {
        self.0
    }
}

/// LTLf abstract syntax.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    True,
    False,
    Atom(Atom),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    /// Strict next: requires a successor position.
    Next(Box<Formula>),
    /// Weak next: holds at the last position.
    WeakNext(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
    Release(Box<Formula>, Box<Formula>),
    Eventually(Box<Formula>),
    Always(Box<Formula>),
}

#[allow(clippy::should_implement_trait)]
impl Formula {
    pub fn atom(name: &str) -> Formula {
        Formula::Atom(Atom::new(name).expect("valid atom name"))
    }
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }
    pub fn and(l: Formula, r: Formula) -> Formula {
        Formula::And(Box::new(l), Box::new(r))
    }
    pub fn or(l: Formula, r: Formula) -> Formula {
        Formula::Or(Box::new(l), Box::new(r))
    }
    pub fn implies(l: Formula, r: Formula) -> Formula {
        Formula::Implies(Box::new(l), Box::new(r))
    }
    pub fn next(f: Formula) -> Formula {
        Formula::Next(Box::new(f))
    }
    pub fn weak_next(f: Formula) -> Formula {
        Formula::WeakNext(Box::new(f))
    }
    pub fn until(l: Formula, r: Formula) -> Formula {
        Formula::Until(Box::new(l), Box::new(r))
    }
    pub fn release(l: Formula, r: Formula) -> Formula {
        Formula::Release(Box::new(l), Box::new(r))
    }
    pub fn eventually(f: Formula) -> Formula {
        Formula::Eventually(Box::new(f))
    }
    pub fn always(f: Formula) -> Formula {
        Formula::Always(Box::new(f))
    }

    /// `F true`: satisfied by every non-empty suffix, falsified by the empty one.
    pub fn alive() -> Formula {
        Formula::eventually(Formula::True)
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children().iter().map(|c| c.depth()).max().unwrap_or(0)
    }

    pub fn children(&self) -> Vec<&Formula> {
        use Formula::*;
        match self {
            True | False | Atom(_) => vec![],
            Not(f) | Next(f) | WeakNext(f) | Eventually(f) | Always(f) => vec![f],
            And(l, r) | Or(l, r) | Implies(l, r) | Until(l, r) | Release(l, r) => vec![l, r],
        }
    }

    /// Atoms mentioned anywhere in the formula, sorted and deduplicated.
    pub fn atoms(&self) -> Vec<Atom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_atoms(&self, out: &mut Vec<Atom>) {
        if let Formula::Atom(a) = self {
            out.push(a.clone());
        }
        for c in self.children() {
            c.collect_atoms(out);
        }
    }

    /// True for atoms and for subformulas rooted at a temporal operator.
    pub fn is_temporal_atom(&self) -> bool {
        use Formula::*;
        matches!(
            self,
            Atom(_) | Next(_) | WeakNext(_) | Until(..) | Release(..) | Eventually(_) | Always(_)
        )
    }

    /// Rewrites every derived operator into `true`, atoms, `!`, `&`, `X`, `U`.
    pub fn to_core(&self) -> Formula {
        use Formula as F;
        match self {
            F::True => F::True,
            F::False => F::not(F::True),
            F::Atom(a) => F::Atom(a.clone()),
            F::Not(f) => F::not(f.to_core()),
            F::And(l, r) => F::and(l.to_core(), r.to_core()),
            F::Or(l, r) => F::not(F::and(F::not(l.to_core()), F::not(r.to_core()))),
            F::Implies(l, r) => F::not(F::and(l.to_core(), F::not(r.to_core()))),
            F::Next(f) => F::next(f.to_core()),
            F::WeakNext(f) => F::not(F::next(F::not(f.to_core()))),
            F::Until(l, r) => F::until(l.to_core(), r.to_core()),
            F::Release(l, r) => F::not(F::until(F::not(l.to_core()), F::not(r.to_core()))),
            F::Eventually(f) => F::until(F::True, f.to_core()),
            F::Always(f) => F::not(F::until(F::True, F::not(f.to_core()))),
        }
    }
}

// Binding strength used by both the parser and the printer.
const PREC_IMPLIES: u8 = 1;
const PREC_OR: u8 = 2;
const PREC_AND: u8 = 3;
const PREC_TEMPORAL: u8 = 4;
const PREC_UNARY: u8 = 5;
const PREC_PRIMARY: u8 = 6;

impl Formula {
    fn precedence(&self) -> u8 {
        use Formula::*;
        match self {
            True | False | Atom(_) => PREC_PRIMARY,
            Not(_) | Next(_) | WeakNext(_) | Eventually(_) | Always(_) => PREC_UNARY,
            Until(..) | Release(..) => PREC_TEMPORAL,
            And(..) => PREC_AND,
            Or(..) => PREC_OR,
            Implies(..) => PREC_IMPLIES,
        }
    }

    fn fmt_child(&self, f: &mut fmt::Formatter<'_>, parens: bool) -> fmt::Result {
        if parens {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

/// Formats with the minimal parentheses needed to re-parse to the same tree.
pub fn format_formula(formula: &Formula) -> String {
    formula.to_string()
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Formula::*;
        let p = self.precedence();
        match self {
            True => f.write_str("true"),
            False => f.write_str("false"),
            Atom(a) => write!(f, "{a}"),
            Not(x) => {
                f.write_str("!")?;
                x.fmt_child(f, x.precedence() < PREC_UNARY)
            }
            Next(x) | WeakNext(x) | Eventually(x) | Always(x) => {
                let op = match self {
                    Next(_) => "X",
                    WeakNext(_) => "N",
                    Eventually(_) => "F",
                    _ => "G",
                };
                write!(f, "{op} ")?;
                x.fmt_child(f, x.precedence() < PREC_UNARY)
            }
            // Right-associative binaries.
            Until(l, r) | Release(l, r) | Implies(l, r) => {
                let op = match self {
                    Until(..) => "U",
                    Release(..) => "R",
                    _ => "->",
                };
                l.fmt_child(f, l.precedence() <= p)?;
                write!(f, " {op} ")?;
                r.fmt_child(f, r.precedence() < p)
            }
            // Left-associative binaries.
            And(l, r) | Or(l, r) => {
                let op = if matches!(self, And(..)) { "&" } else { "|" };
                l.fmt_child(f, l.precedence() < p)?;
                write!(f, " {op} ")?;
                r.fmt_child(f, r.precedence() <= p)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atom_validation() {
        assert!(Atom::new("a").is_ok());
        assert!(Atom::new("goal_2").is_ok());
        assert!(Atom::new("").is_err());
        assert!(Atom::new("A").is_err());
        assert!(Atom::new("2a").is_err());
        assert!(Atom::new("true").is_err());
    }

    #[test]
    fn alphabet_is_sorted_and_rejects_duplicates() {
        let ab = Alphabet::from_names(&["c", "a", "b"]).unwrap();
        let names: Vec<_> = ab.atoms().iter().map(|a| a.as_str()).collect();
        assert_eq!(names, ["a", "b", "c"]);
        assert_eq!(ab.letter(&["c", "a"]).unwrap(), Letter(0b101));
        assert!(Alphabet::from_names(&["a", "a"]).is_err());
        assert_eq!(ab.letter_count(), 8);
        assert!(ab.contains_letter(Letter(7)));
        assert!(!ab.contains_letter(Letter(8)));
    }

    #[test]
    fn format_examples() {
        let a = || Formula::atom("a");
        let b = || Formula::atom("b");
        let c = || Formula::atom("c");
        let phi = Formula::and(
            Formula::eventually(a()),
            Formula::always(Formula::not(b())),
        );
        assert_eq!(format_formula(&phi), "F a & G !b");
        assert_eq!(
            format_formula(&Formula::until(a(), Formula::until(b(), c()))),
            "a U b U c"
        );
        assert_eq!(
            format_formula(&Formula::not(Formula::until(a(), b()))),
            "!(a U b)"
        );
        assert_eq!(
            format_formula(&Formula::until(Formula::until(a(), b()), c())),
            "(a U b) U c"
        );
        assert_eq!(
            format_formula(&Formula::and(a(), Formula::and(b(), c()))),
            "a & (b & c)"
        );
        assert_eq!(
            format_formula(&Formula::eventually(Formula::and(a(), b()))),
            "F (a & b)"
        );
    }

    #[test]
    fn sizes_and_atoms() {
        let phi = parse_formula("F a & G !b", AtomSource::Infer).unwrap();
        assert_eq!(phi.formula.size(), 6);
        assert_eq!(phi.formula.depth(), 4);
        assert_eq!(phi.formula.atoms().len(), 2);
    }
}
