//! Labeled POMDPs with stationary dynamics, beliefs and simulation.

mod belief;
mod file;
mod sim;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ltlf::{Alphabet, AtomError, Letter};

pub use belief::{belief_init, belief_update, predict, Belief};
pub use file::{load_model, ModelDocument, ProbValue, RewardEntry, TransitionEntry};
pub use sim::{mix_seed, sample_sparse, sample_trajectory, Policy, PolicyError, SimRng, Step, Trajectory};

/// Row tolerance for programmatically built models.
pub const BUILD_TOLERANCE: f64 = 1e-9;
/// Row tolerance for model documents; rows are never renormalized.
pub const LOAD_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PomdpError {
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("{what} sums to {sum} (must be 1)")]
    Normalization { what: String, sum: f64 },
    #[error("negative or non-finite probability {value} in {what}")]
    BadProbability { what: String, value: f64 },
    #[error("unknown {kind} {name:?}")]
    UnknownName { kind: &'static str, name: String },
    #[error("duplicate {kind} name {name:?}")]
    DuplicateName { kind: &'static str, name: String },
    #[error("observation {obs} has zero probability under the current belief")]
    ImpossibleObservation { obs: usize },
    #[error("invalid stopping model: {0}")]
    Stopping(String),
    #[error("belief has {got} entries, model has {expected} states")]
    Dimension { expected: usize, got: usize },
    #[error(transparent)]
    Atom(#[from] AtomError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Distribution of the horizon `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StoppingModel {
    /// Exactly `T + 1` steps `t = 0..=T`.
    Fixed {
        #[serde(rename = "T")]
        horizon: usize,
    },
    /// Stop after each step with probability `1 - gamma`.
    Geometric { gamma: f64 },
}

impl StoppingModel {
    pub fn validate(&self) -> Result<(), PomdpError> {
        match *self {
            StoppingModel::Fixed { .. } => Ok(()),
            StoppingModel::Geometric { gamma } if gamma > 0.0 && gamma < 1.0 => Ok(()),
            StoppingModel::Geometric { gamma } => Err(PomdpError::Stopping(format!(
                "geometric gamma must lie in (0, 1), got {gamma}"
            ))),
        }
    }

    /// `E[T]`.
    pub fn expected_horizon(&self) -> f64 {
        match *self {
            StoppingModel::Fixed { horizon } => horizon as f64,
            StoppingModel::Geometric { gamma } => gamma / (1.0 - gamma),
        }
    }
}

/// Interface shared by base models and products; everything the belief
/// filter, simulator and solvers need.
pub trait DiscretePomdp: Sync {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn n_obs(&self) -> usize;
    /// Sparse initial distribution.
    fn initial(&self) -> &[(usize, f64)];
    /// Sparse row `P(x, a; ·)`.
    fn transitions(&self, x: usize, a: usize) -> &[(usize, f64)];
    /// Sparse row `Z(x; ·)`.
    fn observations(&self, x: usize) -> &[(usize, f64)];
    fn obs_prob(&self, x: usize, o: usize) -> f64;
    fn reward(&self, x: usize, a: usize) -> f64;
    fn stopping(&self) -> StoppingModel;
}

/// The tuple `(S, A, P, ϖ, O, Z, AP, L, r)` with a stopping model.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPomdp {
    name: String,
    states: Vec<String>,
    actions: Vec<String>,
    observations: Vec<String>,
    alphabet: Alphabet,
    initial: Vec<(usize, f64)>,
    labels: Vec<Letter>,
    transitions: Vec<Vec<(usize, f64)>>,
    observe: Vec<Vec<(usize, f64)>>,
    obs_dense: Vec<f64>,
    rewards: Vec<f64>,
    stopping: StoppingModel,
}

impl LabeledPomdp {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn action_names(&self) -> &[String] {
        &self.actions
    }

    pub fn obs_names(&self) -> &[String] {
        &self.observations
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn label(&self, s: usize) -> Letter {
        self.labels[s]
    }

    pub fn labels(&self) -> &[Letter] {
        &self.labels
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn with_stopping(mut self, stopping: StoppingModel) -> Result<Self, PomdpError> {
        stopping.validate()?;
        self.stopping = stopping;
        Ok(self)
    }
}

impl DiscretePomdp for LabeledPomdp {
    fn n_states(&self) -> usize {
        self.states.len()
    }

    fn n_actions(&self) -> usize {
        self.actions.len()
    }

    fn n_obs(&self) -> usize {
        self.observations.len()
    }

    fn initial(&self) -> &[(usize, f64)] {
        &self.initial
    }

    fn transitions(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.transitions[s * self.actions.len() + a]
    }

    fn observations(&self, s: usize) -> &[(usize, f64)] {
        &self.observe[s]
    }

    fn obs_prob(&self, s: usize, o: usize) -> f64 {
        self.obs_dense[s * self.observations.len() + o]
    }

    fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.actions.len() + a]
    }

    fn stopping(&self) -> StoppingModel {
        self.stopping
    }
}

/// Incremental construction of a [`LabeledPomdp`]; repeated entries for the
/// same cell accumulate.
#[derive(Debug, Clone)]
pub struct PomdpBuilder {
    name: String,
    states: Vec<String>,
    actions: Vec<String>,
    observations: Vec<String>,
    alphabet: Alphabet,
    initial: Vec<f64>,
    labels: Vec<Letter>,
    transitions: Vec<HashMap<usize, f64>>,
    observe: Vec<HashMap<usize, f64>>,
    rewards: Vec<f64>,
    stopping: StoppingModel,
}

impl PomdpBuilder {
    pub fn new(
        name: impl Into<String>,
        states: Vec<String>,
        actions: Vec<String>,
        observations: Vec<String>,
        alphabet: Alphabet,
        stopping: StoppingModel,
    ) -> Result<Self, PomdpError> {
        for (kind, names) in [
            ("state", &states),
            ("action", &actions),
            ("observation", &observations),
        ] {
            if names.is_empty() {
                return Err(PomdpError::Schema(format!("model needs at least one {kind}")));
            }
            let mut seen = std::collections::HashSet::new();
            for n in names.iter() {
                if !seen.insert(n.as_str()) {
                    return Err(PomdpError::DuplicateName {
                        kind,
                        name: n.clone(),
                    });
                }
            }
        }
        let (ns, na) = (states.len(), actions.len());
        Ok(PomdpBuilder {
            name: name.into(),
            initial: vec![0.0; ns],
            labels: vec![Letter::EMPTY; ns],
            transitions: vec![HashMap::new(); ns * na],
            observe: vec![HashMap::new(); ns],
            rewards: vec![0.0; ns * na],
            states,
            actions,
            observations,
            alphabet,
            stopping,
        })
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn initial(&mut self, s: usize, p: f64) -> &mut Self {
        self.initial[s] += p;
        self
    }

    pub fn label(&mut self, s: usize, letter: Letter) -> &mut Self {
        self.labels[s] = letter;
        self
    }

    pub fn transition(&mut self, s: usize, a: usize, next: usize, p: f64) -> &mut Self {
        *self.transitions[s * self.actions.len() + a].entry(next).or_insert(0.0) += p;
        self
    }

    pub fn observe(&mut self, s: usize, o: usize, p: f64) -> &mut Self {
        *self.observe[s].entry(o).or_insert(0.0) += p;
        self
    }

    pub fn reward(&mut self, s: usize, a: usize, value: f64) -> &mut Self {
        self.rewards[s * self.actions.len() + a] = value;
        self
    }

    /// Same reward for every action at `s`.
    pub fn state_reward(&mut self, s: usize, value: f64) -> &mut Self {
        for a in 0..self.actions.len() {
            self.reward(s, a, value);
        }
        self
    }

    /// Validates every distribution against `tolerance`.
    pub fn build_with_tolerance(self, tolerance: f64) -> Result<LabeledPomdp, PomdpError> {
        self.stopping.validate()?;
        let ns = self.states.len();
        let na = self.actions.len();
        let no = self.observations.len();
        for s in 0..ns {
            if !self.alphabet.contains_letter(self.labels[s]) {
                return Err(PomdpError::Schema(format!(
                    "label of state {:?} uses atoms outside the alphabet",
                    self.states[s]
                )));
            }
        }
        if let Some(r) = self.rewards.iter().find(|r| !r.is_finite()) {
            return Err(PomdpError::Schema(format!("non-finite reward {r}")));
        }
        let initial = sparse_row(
            self.initial.iter().copied().enumerate().collect(),
            "initial distribution".into(),
            tolerance,
        )?;
        let mut transitions = Vec::with_capacity(ns * na);
        for (i, row) in self.transitions.into_iter().enumerate() {
            let what = format!(
                "transition row ({}, {})",
                self.states[i / na],
                self.actions[i % na]
            );
            transitions.push(sparse_row(row.into_iter().collect(), what, tolerance)?);
        }
        let mut observe = Vec::with_capacity(ns);
        let mut obs_dense = vec![0.0; ns * no];
        for (s, row) in self.observe.into_iter().enumerate() {
            let what = format!("observation row {}", self.states[s]);
            let row = sparse_row(row.into_iter().collect(), what, tolerance)?;
            for &(o, p) in &row {
                if o >= no {
                    return Err(PomdpError::Schema(format!("observation index {o} out of range")));
                }
                obs_dense[s * no + o] = p;
            }
            observe.push(row);
        }
        if transitions.iter().flatten().any(|&(t, _)| t >= ns) {
            return Err(PomdpError::Schema("transition target out of range".into()));
        }
        Ok(LabeledPomdp {
            name: self.name,
            states: self.states,
            actions: self.actions,
            observations: self.observations,
            alphabet: self.alphabet,
            initial,
            labels: self.labels,
            transitions,
            observe,
            obs_dense,
            rewards: self.rewards,
            stopping: self.stopping,
        })
    }

    pub fn build(self) -> Result<LabeledPomdp, PomdpError> {
        self.build_with_tolerance(BUILD_TOLERANCE)
    }
}

fn sparse_row(
    mut entries: Vec<(usize, f64)>,
    what: String,
    tolerance: f64,
) -> Result<Vec<(usize, f64)>, PomdpError> {
    if let Some(&(_, p)) = entries.iter().find(|(_, p)| !p.is_finite() || *p < 0.0) {
        return Err(PomdpError::BadProbability { what, value: p });
    }
    entries.retain(|&(_, p)| p > 0.0);
    entries.sort_by_key(|&(i, _)| i);
    let sum: f64 = entries.iter().map(|&(_, p)| p).sum();
    if (sum - 1.0).abs() > tolerance {
        return Err(PomdpError::Normalization { what, sum });
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn builder_validates_rows() {
        let ab = Alphabet::from_names(&["a"]).unwrap();
        let stop = StoppingModel::Fixed { horizon: 2 };
        let mut b = PomdpBuilder::new("m", names("s", 2), names("a", 1), names("o", 1), ab, stop).unwrap();
        b.initial(0, 1.0);
        b.transition(0, 0, 1, 0.9);
        b.transition(1, 0, 1, 1.0);
        b.observe(0, 0, 1.0).observe(1, 0, 1.0);
        match b.build() {
            Err(PomdpError::Normalization { what, sum }) => {
                assert!(what.contains("(s0, a0)"), "{what}");
                assert!((sum - 0.9).abs() < 1e-12);
            }
            other => panic!("expected normalization error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_names_and_bad_gamma() {
        let ab = Alphabet::from_names(&["a"]).unwrap();
        let stop = StoppingModel::Geometric { gamma: 0.5 };
        assert!(matches!(
            PomdpBuilder::new("m", vec!["x".into(), "x".into()], names("a", 1), names("o", 1), ab.clone(), stop),
            Err(PomdpError::DuplicateName { kind: "state", .. })
        ));
        assert!(StoppingModel::Geometric { gamma: 1.0 }.validate().is_err());
        assert!(StoppingModel::Fixed { horizon: 0 }.validate().is_ok());
        assert_eq!(StoppingModel::Geometric { gamma: 0.99 }.expected_horizon(), 0.99 / (1.0 - 0.99));
    }
}
