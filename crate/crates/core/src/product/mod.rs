//! The constrained product of a labeled POMDP with a DFA.
//!
//! A product state `x` pairs a base state `s` with an automaton state `q`.
//! Leaving `(s, q)` the automaton reads `L(s)`, so after a run
//! `s_0 … s_T` the component `Q_{T+1}` has consumed all `T + 1` labels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dfa::Dfa;
use crate::pomdp::{
    DiscretePomdp, LabeledPomdp, ModelDocument, ProbValue, RewardEntry, StoppingModel,
    Trajectory, TransitionEntry,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProductError {
    #[error("model atoms [{model}] differ from automaton atoms [{dfa}]")]
    AtomMismatch { model: String, dfa: String },
}

#[derive(Debug, Clone)]
pub struct ProductPomdp {
    base: LabeledPomdp,
    dfa: Dfa,
    /// `(s, q)` of every product index.
    pairs: Vec<(usize, usize)>,
    /// Dense `s * |Q| + q` to product index, `usize::MAX` when pruned.
    index: Vec<usize>,
    initial: Vec<(usize, f64)>,
    transitions: Vec<Vec<(usize, f64)>>,
    final_reward: Vec<f64>,
}

fn atom_list(names: impl Iterator<Item = String>) -> String {
    names.collect::<Vec<_>>().join(", ")
}

/// Builds the dense product with `x = s * |Q| + q`.
pub fn build_product(m: &LabeledPomdp, d: &Dfa) -> Result<ProductPomdp, ProductError> {
    if m.alphabet() != d.alphabet() {
        return Err(ProductError::AtomMismatch {
            model: atom_list(m.alphabet().atoms().iter().map(|a| a.as_str().to_string())),
            dfa: atom_list(d.alphabet().atoms().iter().map(|a| a.as_str().to_string())),
        });
    }
    let nq = d.n_states();
    let ns = m.n_states();
    let na = m.n_actions();
    let pairs: Vec<(usize, usize)> = (0..ns).flat_map(|s| (0..nq).map(move |q| (s, q))).collect();
    let mut transitions = Vec::with_capacity(ns * nq * na);
    for &(s, q) in &pairs {
        let q2 = d.next(q, m.label(s));
        for a in 0..na {
            transitions.push(
                m.transitions(s, a)
                    .iter()
                    .map(|&(s2, p)| (s2 * nq + q2, p))
                    .collect(),
            );
        }
    }
    let initial = m
        .initial()
        .iter()
        .map(|&(s, p)| (s * nq + d.initial(), p))
        .collect();
    let final_reward = pairs
        .iter()
        .map(|&(_, q)| if d.is_accepting(q) { 1.0 } else { 0.0 })
        .collect();
    Ok(ProductPomdp {
        base: m.clone(),
        dfa: d.clone(),
        index: (0..pairs.len()).collect(),
        pairs,
        initial,
        transitions,
        final_reward,
    })
}

impl ProductPomdp {
    pub fn base(&self) -> &LabeledPomdp {
        &self.base
    }

    pub fn dfa(&self) -> &Dfa {
        &self.dfa
    }

    pub fn n_automaton_states(&self) -> usize {
        self.dfa.n_states()
    }

    /// `(s, q)` of product state `x`.
    pub fn pair(&self, x: usize) -> (usize, usize) {
        self.pairs[x]
    }

    pub fn index_of(&self, s: usize, q: usize) -> Option<usize> {
        let i = self.index[s * self.dfa.n_states() + q];
        (i != usize::MAX).then_some(i)
    }

    /// `r^f(x)`: 1 when the automaton component is accepting.
    pub fn final_reward(&self, x: usize) -> f64 {
        self.final_reward[x]
    }

    pub fn final_rewards(&self) -> &[f64] {
        &self.final_reward
    }

    pub fn is_pruned(&self) -> bool {
        self.pairs.len() != self.index.len()
    }

    /// `Q_{T+1}` after the base run `s_0 … s_T`.
    pub fn automaton_state_after(&self, base_states: impl IntoIterator<Item = usize>) -> usize {
        base_states
            .into_iter()
            .fold(self.dfa.initial(), |q, s| self.dfa.next(q, self.base.label(s)))
    }

    /// Whether a product trajectory ends with `r^f(X_{T+1}) = 1`.
    pub fn final_satisfied(&self, run: &Trajectory) -> bool {
        self.final_reward[run.terminal] == 1.0
    }

    /// Base-model projection of a product trajectory.
    pub fn base_states<'a>(&'a self, run: &'a Trajectory) -> impl Iterator<Item = usize> + 'a {
        run.states().map(|x| self.pairs[x].0)
    }

    /// Drops product states unreachable from the initial support.
    pub fn pruned(&self) -> ProductPomdp {
        let n = self.pairs.len();
        let na = self.base.n_actions();
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = self.initial.iter().map(|&(x, _)| x).collect();
        for &x in &stack {
            seen[x] = true;
        }
        while let Some(x) = stack.pop() {
            for a in 0..na {
                for &(y, _) in &self.transitions[x * na + a] {
                    if !seen[y] {
                        seen[y] = true;
                        stack.push(y);
                    }
                }
            }
        }
        let keep: Vec<usize> = (0..n).filter(|&x| seen[x]).collect();
        let mut remap = vec![usize::MAX; n];
        for (i, &x) in keep.iter().enumerate() {
            remap[x] = i;
        }
        let nq = self.dfa.n_states();
        let mut index = vec![usize::MAX; self.index.len()];
        for (i, &x) in keep.iter().enumerate() {
            let (s, q) = self.pairs[x];
            index[s * nq + q] = i;
        }
        let mut transitions = Vec::with_capacity(keep.len() * na);
        for &x in &keep {
            for a in 0..na {
                transitions.push(
                    self.transitions[x * na + a]
                        .iter()
                        .map(|&(y, p)| (remap[y], p))
                        .collect(),
                );
            }
        }
        ProductPomdp {
            base: self.base.clone(),
            dfa: self.dfa.clone(),
            pairs: keep.iter().map(|&x| self.pairs[x]).collect(),
            index,
            initial: self.initial.iter().map(|&(x, p)| (remap[x], p)).collect(),
            transitions,
            final_reward: keep.iter().map(|&x| self.final_reward[x]).collect(),
        }
    }

    pub fn state_name(&self, x: usize) -> String {
        let (s, q) = self.pairs[x];
        format!("{}/q{}", self.base.state_names()[s], q)
    }

    pub fn to_document(&self) -> ProductDocument {
        let names: Vec<String> = (0..self.n_states()).map(|x| self.state_name(x)).collect();
        let row = |r: &[(usize, f64)]| -> BTreeMap<String, ProbValue> {
            r.iter().map(|&(y, p)| (names[y].clone(), ProbValue::Number(p))).collect()
        };
        let actions = self.base.action_names();
        let mut transitions = Vec::new();
        let mut rewards = Vec::new();
        for x in 0..self.n_states() {
            for (a, an) in actions.iter().enumerate() {
                transitions.push(TransitionEntry {
                    state: names[x].clone(),
                    action: an.clone(),
                    next: row(self.transitions(x, a)),
                });
                let v = self.reward(x, a);
                if v != 0.0 {
                    rewards.push(RewardEntry {
                        state: names[x].clone(),
                        action: Some(an.clone()),
                        value: v,
                    });
                }
            }
        }
        let obs = self.base.obs_names();
        let base = self.base.to_document();
        ProductDocument {
            model: ModelDocument {
                name: format!("{} x {}", self.base.name(), self.dfa.name()),
                atoms: base.atoms,
                states: names.clone(),
                actions: actions.to_vec(),
                observations: obs.to_vec(),
                initial: row(&self.initial),
                labels: (0..self.n_states())
                    .filter_map(|x| {
                        let s = self.pairs[x].0;
                        base.labels
                            .get(&self.base.state_names()[s])
                            .map(|l| (names[x].clone(), l.clone()))
                    })
                    .collect(),
                transitions,
                observe: (0..self.n_states())
                    .map(|x| {
                        let r = self
                            .observations(x)
                            .iter()
                            .map(|&(o, p)| (obs[o].clone(), ProbValue::Number(p)))
                            .collect();
                        (names[x].clone(), r)
                    })
                    .collect(),
                rewards,
                stopping: self.stopping(),
            },
            final_reward: (0..self.n_states())
                .map(|x| (names[x].clone(), self.final_reward[x] as u8))
                .collect(),
            provenance: Provenance {
                model: self.base.name().to_string(),
                dfa: self.dfa.name().to_string(),
                automaton_states: self.dfa.n_states(),
                pruned: self.is_pruned(),
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("product documents serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub model: String,
    pub dfa: String,
    pub automaton_states: usize,
    pub pruned: bool,
}

/// A model document plus the `r^f` channel and where the product came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductDocument {
    #[serde(flatten)]
    pub model: ModelDocument,
    pub final_reward: BTreeMap<String, u8>,
    pub provenance: Provenance,
}

impl DiscretePomdp for ProductPomdp {
    fn n_states(&self) -> usize {
        self.pairs.len()
    }

    fn n_actions(&self) -> usize {
        self.base.n_actions()
    }

    fn n_obs(&self) -> usize {
        self.base.n_obs()
    }

    fn initial(&self) -> &[(usize, f64)] {
        &self.initial
    }

    fn transitions(&self, x: usize, a: usize) -> &[(usize, f64)] {
        &self.transitions[x * self.base.n_actions() + a]
    }

    fn observations(&self, x: usize) -> &[(usize, f64)] {
        self.base.observations(self.pairs[x].0)
    }

    fn obs_prob(&self, x: usize, o: usize) -> f64 {
        self.base.obs_prob(self.pairs[x].0, o)
    }

    fn reward(&self, x: usize, a: usize) -> f64 {
        self.base.reward(self.pairs[x].0, a)
    }

    fn stopping(&self) -> StoppingModel {
        self.base.stopping()
    }
}
