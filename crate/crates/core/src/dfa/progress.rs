//! Formula progression and propositional canonical forms.
//!
//! A formula is viewed as a boolean combination of its *temporal atoms*
//! (atomic propositions and subformulas rooted at `X N U R F G`). The
//! [`Canonicalizer`] stores such combinations as reduced ordered decision
//! diagrams, so propositionally equivalent formulas share one node id.

use std::collections::HashMap;

use crate::ltlf::{Alphabet, Formula, Letter, LtlfFormula};

/// One step of progression: the obligation the rest of the word must meet
/// after reading `letter`. Purely syntactic; see [`progress`] for the
/// canonical result.
pub fn progress_once(formula: &Formula, alphabet: &Alphabet, letter: Letter) -> Formula {
    use Formula as F;
    let p = |f: &Formula| progress_once(f, alphabet, letter);
    match formula {
        F::True => F::True,
        F::False => F::False,
        F::Atom(a) => match alphabet.index_of(a.as_str()) {
            Some(i) if letter.contains(i) => F::True,
            _ => F::False,
        },
        F::Not(f) => F::not(p(f)),
        F::And(l, r) => F::and(p(l), p(r)),
        F::Or(l, r) => F::or(p(l), p(r)),
        F::Implies(l, r) => F::implies(p(l), p(r)),
        F::Next(f) => F::and((**f).clone(), F::alive()),
        F::WeakNext(f) => F::or((**f).clone(), F::not(F::alive())),
        F::Eventually(f) => F::or(p(f), formula.clone()),
        F::Always(f) => F::and(p(f), formula.clone()),
        F::Until(l, r) => F::or(p(r), F::and(p(l), formula.clone())),
        F::Release(l, r) => F::and(p(r), F::or(p(l), formula.clone())),
    }
}

/// Progression of `φ` through `letter`, returned in canonical form.
pub fn progress(formula: &LtlfFormula, letter: Letter) -> Formula {
    let mut canon = Canonicalizer::for_formula(&formula.formula);
    let raw = progress_once(&formula.formula, &formula.alphabet, letter);
    let key = canon.key(&raw);
    canon.to_formula(key)
}

/// Whether the empty word satisfies the obligation `φ`.
pub fn empty_accept(formula: &Formula) -> bool {
    use Formula as F;
    match formula {
        F::True => true,
        F::False => false,
        F::Atom(_) => false,
        F::Not(f) => !empty_accept(f),
        F::And(l, r) => empty_accept(l) && empty_accept(r),
        F::Or(l, r) => empty_accept(l) || empty_accept(r),
        F::Implies(l, r) => !empty_accept(l) || empty_accept(r),
        F::Next(_) | F::Eventually(_) | F::Until(..) => false,
        F::WeakNext(_) | F::Always(_) | F::Release(..) => true,
    }
}

/// Canonical key of a formula inside one [`Canonicalizer`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Key(u32);

impl Key {
    pub const FALSE: Key = Key(0);
    pub const TRUE: Key = Key(1);

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Node {
    var: u32,
    lo: Key,
    hi: Key,
}

const TERMINAL: u32 = u32::MAX;

#[derive(Debug)]
pub struct Canonicalizer {
    vars: Vec<Formula>,
    var_index: HashMap<Formula, u32>,
    nodes: Vec<Node>,
    unique: HashMap<Node, Key>,
    ite_cache: HashMap<(Key, Key, Key), Key>,
}

impl Canonicalizer {
    /// Variable order: the temporal atoms of `formula`'s closure plus the
    /// `F true` marker, sorted by size and then structurally.
    pub fn for_formula(formula: &Formula) -> Self {
        let mut closure = Vec::new();
        collect_temporal_atoms(formula, &mut closure);
        closure.push(Formula::alive());
        closure.sort_by(|a, b| a.size().cmp(&b.size()).then_with(|| a.cmp(b)));
        closure.dedup();
        let mut c = Canonicalizer {
            vars: Vec::new(),
            var_index: HashMap::new(),
            nodes: vec![
                Node { var: TERMINAL, lo: Key::FALSE, hi: Key::FALSE },
                Node { var: TERMINAL, lo: Key::TRUE, hi: Key::TRUE },
            ],
            unique: HashMap::new(),
            ite_cache: HashMap::new(),
        };
        for f in closure {
            c.var_of(&f);
        }
        c
    }

    pub fn variables(&self) -> &[Formula] {
        &self.vars
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    // Variables outside the precomputed closure are appended to the order.
    fn var_of(&mut self, f: &Formula) -> u32 {
        if let Some(&v) = self.var_index.get(f) {
            return v;
        }
        let v = self.vars.len() as u32;
        self.vars.push(f.clone());
        self.var_index.insert(f.clone(), v);
        v
    }

    fn mk(&mut self, var: u32, lo: Key, hi: Key) -> Key {
        if lo == hi {
            return lo;
        }
        let node = Node { var, lo, hi };
        if let Some(&k) = self.unique.get(&node) {
            return k;
        }
        let k = Key(self.nodes.len() as u32);
        self.nodes.push(node);
        self.unique.insert(node, k);
        k
    }

    fn var_node(&mut self, var: u32) -> Key {
        self.mk(var, Key::FALSE, Key::TRUE)
    }

    fn top_var(&self, k: Key) -> u32 {
        self.nodes[k.index()].var
    }

    fn cofactors(&self, k: Key, var: u32) -> (Key, Key) {
        let n = self.nodes[k.index()];
        if n.var == var {
            (n.lo, n.hi)
        } else {
            (k, k)
        }
    }

    /// if-then-else on canonical keys.
    pub fn ite(&mut self, f: Key, g: Key, h: Key) -> Key {
        if f == Key::TRUE {
            return g;
        }
        if f == Key::FALSE {
            return h;
        }
        if g == h {
            return g;
        }
        if g == Key::TRUE && h == Key::FALSE {
            return f;
        }
        if let Some(&k) = self.ite_cache.get(&(f, g, h)) {
            return k;
        }
        let var = [f, g, h]
            .iter()
            .map(|&k| self.top_var(k))
            .min()
            .expect("three operands");
        let (f0, f1) = self.cofactors(f, var);
        let (g0, g1) = self.cofactors(g, var);
        let (h0, h1) = self.cofactors(h, var);
        let lo = self.ite(f0, g0, h0);
        let hi = self.ite(f1, g1, h1);
        let k = self.mk(var, lo, hi);
        self.ite_cache.insert((f, g, h), k);
        k
    }

    pub fn not(&mut self, f: Key) -> Key {
        self.ite(f, Key::FALSE, Key::TRUE)
    }

    pub fn and(&mut self, f: Key, g: Key) -> Key {
        self.ite(f, g, Key::FALSE)
    }

    pub fn or(&mut self, f: Key, g: Key) -> Key {
        self.ite(f, Key::TRUE, g)
    }

    /// Canonical key of `formula`.
    pub fn key(&mut self, formula: &Formula) -> Key {
        use Formula as F;
        match formula {
            F::True => Key::TRUE,
            F::False => Key::FALSE,
            F::Not(f) => {
                let k = self.key(f);
                self.not(k)
            }
            F::And(l, r) => {
                let (a, b) = (self.key(l), self.key(r));
                self.and(a, b)
            }
            F::Or(l, r) => {
                let (a, b) = (self.key(l), self.key(r));
                self.or(a, b)
            }
            F::Implies(l, r) => {
                let (a, b) = (self.key(l), self.key(r));
                let na = self.not(a);
                self.or(na, b)
            }
            _ => {
                let v = self.var_of(formula);
                self.var_node(v)
            }
        }
    }

    /// Reads a key back as a formula (`v & hi | !v & lo` with the obvious
    /// simplifications).
    pub fn to_formula(&self, key: Key) -> Formula {
        if key == Key::TRUE {
            return Formula::True;
        }
        if key == Key::FALSE {
            return Formula::False;
        }
        let n = self.nodes[key.index()];
        let v = self.vars[n.var as usize].clone();
        match (n.lo, n.hi) {
            (Key::FALSE, Key::TRUE) => v,
            (Key::TRUE, Key::FALSE) => Formula::not(v),
            (Key::FALSE, hi) => Formula::and(v, self.to_formula(hi)),
            (lo, Key::FALSE) => Formula::and(Formula::not(v), self.to_formula(lo)),
            (lo, Key::TRUE) => Formula::or(v, self.to_formula(lo)),
            (Key::TRUE, hi) => Formula::or(Formula::not(v), self.to_formula(hi)),
            (lo, hi) => Formula::or(
                Formula::and(v.clone(), self.to_formula(hi)),
                Formula::and(Formula::not(v), self.to_formula(lo)),
            ),
        }
    }

    /// Empty-word acceptance of the formula a key denotes.
    pub fn empty_accept(&self, key: Key, memo: &mut HashMap<Key, bool>) -> bool {
        if key == Key::TRUE {
            return true;
        }
        if key == Key::FALSE {
            return false;
        }
        if let Some(&b) = memo.get(&key) {
            return b;
        }
        let n = self.nodes[key.index()];
        let b = if empty_accept(&self.vars[n.var as usize]) {
            self.empty_accept(n.hi, memo)
        } else {
            self.empty_accept(n.lo, memo)
        };
        memo.insert(key, b);
        b
    }

    /// Progression lifted to keys: each variable is replaced by the key of
    /// its one-step progression.
    pub fn progress(
        &mut self,
        key: Key,
        var_progress: &[Key],
        memo: &mut HashMap<Key, Key>,
    ) -> Key {
        if key == Key::TRUE || key == Key::FALSE {
            return key;
        }
        if let Some(&k) = memo.get(&key) {
            return k;
        }
        let n = self.nodes[key.index()];
        let lo = self.progress(n.lo, var_progress, memo);
        let hi = self.progress(n.hi, var_progress, memo);
        let k = self.ite(var_progress[n.var as usize], hi, lo);
        memo.insert(key, k);
        k
    }

    /// Keys of the one-step progression of every current variable.
    /// New variables created on the way are not included.
    pub fn progress_variables(&mut self, alphabet: &Alphabet, letter: Letter) -> Vec<Key> {
        let vars = self.vars.clone();
        vars.iter()
            .map(|v| {
                let p = progress_once(v, alphabet, letter);
                self.key(&p)
            })
            .collect()
    }
}

fn collect_temporal_atoms(f: &Formula, out: &mut Vec<Formula>) {
    if f.is_temporal_atom() {
        out.push(f.clone());
    }
    for c in f.children() {
        collect_temporal_atoms(c, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltlf::{parse_formula, AtomSource};

    fn lf(s: &str) -> LtlfFormula {
        parse_formula(s, AtomSource::Infer).unwrap()
    }

    fn f(s: &str) -> Formula {
        lf(s).formula
    }

    #[test]
    fn progress_eventually() {
        let fa = lf("F a");
        assert_eq!(progress(&fa, Letter(1)), Formula::True);
        assert_eq!(progress(&fa, Letter(0)), f("F a"));
    }

    #[test]
    fn progress_next_adds_alive_marker() {
        let ab = Alphabet::from_names(&["a", "b"]).unwrap();
        let xa = parse_formula("X a", AtomSource::Explicit(&ab)).unwrap();
        let b = ab.letter(&["b"]).unwrap();
        assert_eq!(progress(&xa, b), Formula::and(f("a"), Formula::alive()));
    }

    #[test]
    fn empty_accept_examples() {
        assert!(empty_accept(&Formula::True));
        assert!(!empty_accept(&f("F a")));
        assert!(empty_accept(&f("G !b")));
        assert!(empty_accept(&f("N a")));
        assert!(!empty_accept(&f("X true")));
        assert!(empty_accept(&f("a R b")));
        assert!(!empty_accept(&f("a U b")));
        assert!(empty_accept(&f("!a")));
        assert!(empty_accept(&f("F a -> b")));
    }

    #[test]
    fn canonical_keys_identify_propositional_equivalents() {
        let src = f("F a & G !b");
        let mut c = Canonicalizer::for_formula(&src);
        let ka = c.key(&f("a"));
        assert_eq!(c.key(&f("a & a")), ka);
        assert_eq!(c.key(&f("F a | true")), Key::TRUE);
        assert_eq!(c.key(&f("!(F a & G !b)")), c.key(&f("!F a | !G !b")));
        assert_eq!(c.key(&f("F a -> G !b")), c.key(&f("G !b | !F a")));
        assert_ne!(c.key(&f("F a")), c.key(&f("G !b")));
    }

    #[test]
    fn reach_avoid_progression_discharges_goal() {
        let phi = lf("F a & G !b");
        let a = phi.alphabet.letter(&["a"]).unwrap();
        let mut c = Canonicalizer::for_formula(&phi.formula);
        let raw = progress_once(&phi.formula, &phi.alphabet, a);
        assert_eq!(c.key(&raw), c.key(&f("G !b")));
    }

    #[test]
    fn key_roundtrip_through_formula() {
        let src = f("(F a & G !b) | X (a U b)");
        let mut c = Canonicalizer::for_formula(&src);
        let k = c.key(&src);
        let back = c.to_formula(k);
        assert_eq!(c.key(&back), k);
    }

    #[test]
    fn variable_order_is_by_size() {
        let c = Canonicalizer::for_formula(&f("F a & G !b"));
        let sizes: Vec<usize> = c.variables().iter().map(|v| v.size()).collect();
        let mut sorted = sizes.clone();
        sorted.sort();
        assert_eq!(sizes, sorted);
        assert!(c.variables().contains(&Formula::alive()));
    }
}
