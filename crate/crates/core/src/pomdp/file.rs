use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{DiscretePomdp, LabeledPomdp, PomdpBuilder, PomdpError, StoppingModel, LOAD_TOLERANCE};
use crate::ltlf::Alphabet;

/// A probability written either as a JSON number or a decimal string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProbValue {
    Number(f64),
    Text(String),
}

impl ProbValue {
    fn value(&self, what: &str) -> Result<f64, PomdpError> {
        let v = match self {
            ProbValue::Number(x) => *x,
            ProbValue::Text(s) => s.trim().parse::<f64>().map_err(|_| {
                PomdpError::Schema(format!("{what}: {s:?} is not a decimal number"))
            })?,
        };
        if !v.is_finite() || v < 0.0 {
            return Err(PomdpError::BadProbability {
                what: what.to_string(),
                value: v,
            });
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionEntry {
    pub state: String,
    pub action: String,
    pub next: BTreeMap<String, ProbValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardEntry {
    pub state: String,
    /// Absent means every action.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    pub value: f64,
}

/// On-disk form of a [`LabeledPomdp`]. Unlisted probabilities are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub name: String,
    pub atoms: Vec<String>,
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub observations: Vec<String>,
    pub initial: BTreeMap<String, ProbValue>,
    #[serde(default)]
    pub labels: BTreeMap<String, Vec<String>>,
    pub transitions: Vec<TransitionEntry>,
    pub observe: BTreeMap<String, BTreeMap<String, ProbValue>>,
    #[serde(default)]
    pub rewards: Vec<RewardEntry>,
    pub stopping: StoppingModel,
}

fn lookup(
    index: &HashMap<&str, usize>,
    kind: &'static str,
    name: &str,
) -> Result<usize, PomdpError> {
    index.get(name).copied().ok_or_else(|| PomdpError::UnknownName {
        kind,
        name: name.to_string(),
    })
}

fn index_of(names: &[String]) -> HashMap<&str, usize> {
    names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect()
}

impl ModelDocument {
    pub fn into_model(self) -> Result<LabeledPomdp, PomdpError> {
        let alphabet = Alphabet::from_names(&self.atoms)?;
        if alphabet.len() != self.atoms.len() {
            return Err(PomdpError::Schema("atoms must be distinct".into()));
        }
        let states = index_of(&self.states);
        let actions = index_of(&self.actions);
        let observations = index_of(&self.observations);
        let mut b = PomdpBuilder::new(
            self.name.clone(),
            self.states.clone(),
            self.actions.clone(),
            self.observations.clone(),
            alphabet.clone(),
            self.stopping,
        )?;
        for (s, p) in &self.initial {
            let si = lookup(&states, "state", s)?;
            b.initial(si, p.value("initial")?);
        }
        for (s, atoms) in &self.labels {
            let si = lookup(&states, "state", s)?;
            for a in atoms {
                if alphabet.index_of(a).is_none() {
                    return Err(PomdpError::UnknownName {
                        kind: "atom",
                        name: a.clone(),
                    });
                }
            }
            b.label(si, alphabet.letter(atoms)?);
        }
        let mut seen = std::collections::HashSet::new();
        for t in &self.transitions {
            let si = lookup(&states, "state", &t.state)?;
            let ai = lookup(&actions, "action", &t.action)?;
            if !seen.insert((si, ai)) {
                return Err(PomdpError::Schema(format!(
                    "transition row ({}, {}) listed twice",
                    t.state, t.action
                )));
            }
            for (n, p) in &t.next {
                let ni = lookup(&states, "state", n)?;
                b.transition(si, ai, ni, p.value("transition")?);
            }
        }
        for (s, row) in &self.observe {
            let si = lookup(&states, "state", s)?;
            for (o, p) in row {
                let oi = lookup(&observations, "observation", o)?;
                b.observe(si, oi, p.value("observation")?);
            }
        }
        for r in &self.rewards {
            let si = lookup(&states, "state", &r.state)?;
            match &r.action {
                Some(a) => {
                    let ai = lookup(&actions, "action", a)?;
                    b.reward(si, ai, r.value);
                }
                None => {
                    b.state_reward(si, r.value);
                }
            }
        }
        b.build_with_tolerance(LOAD_TOLERANCE)
    }
}

impl LabeledPomdp {
    pub fn to_document(&self) -> ModelDocument {
        let s = &self.states;
        let prob_map = |row: &[(usize, f64)], names: &[String]| -> BTreeMap<String, ProbValue> {
            row.iter()
                .map(|&(i, p)| (names[i].clone(), ProbValue::Number(p)))
                .collect()
        };
        let mut transitions = Vec::new();
        let mut rewards = Vec::new();
        for si in 0..s.len() {
            for ai in 0..self.actions.len() {
                transitions.push(TransitionEntry {
                    state: s[si].clone(),
                    action: self.actions[ai].clone(),
                    next: prob_map(self.transitions(si, ai), s),
                });
                let v = self.reward(si, ai);
                if v != 0.0 {
                    rewards.push(RewardEntry {
                        state: s[si].clone(),
                        action: Some(self.actions[ai].clone()),
                        value: v,
                    });
                }
            }
        }
        ModelDocument {
            name: self.name.clone(),
            atoms: self.alphabet.atoms().iter().map(|a| a.as_str().to_string()).collect(),
            states: s.clone(),
            actions: self.actions.clone(),
            observations: self.observations.clone(),
            initial: prob_map(&self.initial, s),
            labels: (0..s.len())
                .filter(|&i| self.labels[i].bits() != 0)
                .map(|i| {
                    let names = self.alphabet.names_in(self.labels[i]);
                    (s[i].clone(), names.into_iter().map(String::from).collect())
                })
                .collect(),
            transitions,
            observe: (0..s.len())
                .map(|i| (s[i].clone(), prob_map(&self.observe[i], &self.observations)))
                .collect(),
            rewards,
            stopping: self.stopping,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("model documents serialize")
    }
}

/// Parses and validates a JSON model document.
pub fn load_model(text: &str) -> Result<LabeledPomdp, PomdpError> {
    let doc: ModelDocument =
        serde_json::from_str(text).map_err(|e| PomdpError::Schema(e.to_string()))?;
    doc.into_model()
}
