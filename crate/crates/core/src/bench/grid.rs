use serde::{Deserialize, Serialize};

use crate::ltlf::Alphabet;
use crate::pomdp::{LabeledPomdp, PomdpBuilder, PomdpError, StoppingModel};

pub type Cell = [usize; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellLabel {
    pub cell: Cell,
    pub atoms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReward {
    pub cell: Cell,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Motion {
    /// The intended move with probability `p_intend`; the remaining mass is
    /// spread evenly over the three directions that are not opposite.
    Stochastic { p_intend: f64 },
    Deterministic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sensor {
    /// A uniformly random orthogonal in-grid neighbour of the true cell.
    NoisyLocation {
        #[serde(default)]
        include_self: bool,
    },
    /// An object carrying `atom` sits at one of `candidates`, uniformly at
    /// random. Within Manhattan distance 1 of it the sensor reports 'C'
    /// with the candidate's `close_prob`, otherwise always 'F'.
    PredicateProximity {
        atom: String,
        candidates: Vec<Cell>,
        close_prob: Vec<f64>,
    },
}

/// A gridworld with cells `(col, row)`, `(0, 0)` at the bottom left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub atoms: Vec<String>,
    pub labels: Vec<CellLabel>,
    /// Paid for every action taken in the cell.
    pub rewards: Vec<CellReward>,
    pub motion: Motion,
    pub sensor: Sensor,
    #[serde(default)]
    pub start: Cell,
    pub gamma: f64,
    /// Multiply rewards by `1 - γ`.
    #[serde(default = "yes")]
    pub normalize_rewards: bool,
}

fn yes() -> bool {
    true
}

pub const ACTIONS: [&str; 5] = ["N", "S", "E", "W", "Stay"];
const MOVES: [(isize, isize); 4] = [(0, 1), (0, -1), (1, 0), (-1, 0)];
const OPPOSITE: [usize; 4] = [1, 0, 3, 2];

impl GridSpec {
    pub fn n_cells(&self) -> usize {
        self.width * self.height
    }

    pub fn cell_index(&self, c: Cell) -> usize {
        c[1] * self.width + c[0]
    }

    pub fn cell_of(&self, i: usize) -> Cell {
        [i % self.width, i / self.width]
    }

    pub fn hypotheses(&self) -> usize {
        match &self.sensor {
            Sensor::PredicateProximity { candidates, .. } => candidates.len(),
            Sensor::NoisyLocation { .. } => 1,
        }
    }

    /// Grid cell of base state `s`.
    pub fn cell_of_state(&self, s: usize) -> Cell {
        self.cell_of(s / self.hypotheses())
    }

    fn inside(&self, c: Cell) -> bool {
        c[0] < self.width && c[1] < self.height
    }

    fn step(&self, c: Cell, dir: usize) -> Cell {
        let (dx, dy) = MOVES[dir];
        let x = c[0] as isize + dx;
        let y = c[1] as isize + dy;
        if x < 0 || y < 0 || x >= self.width as isize || y >= self.height as isize {
            c
        } else {
            [x as usize, y as usize]
        }
    }

    /// Successor cells of `c` under action `a`.
    pub fn motion(&self, c: Cell, a: usize) -> Vec<(Cell, f64)> {
        if a == 4 {
            return vec![(c, 1.0)];
        }
        match self.motion {
            Motion::Deterministic => vec![(self.step(c, a), 1.0)],
            Motion::Stochastic { p_intend } => {
                let slip = (1.0 - p_intend) / 3.0;
                let mut out: Vec<(Cell, f64)> = Vec::new();
                for d in 0..4 {
                    if d == OPPOSITE[a] {
                        continue;
                    }
                    let p = if d == a { p_intend + slip } else { slip };
                    let to = self.step(c, d);
                    match out.iter_mut().find(|e| e.0 == to) {
                        Some(e) => e.1 += p,
                        None => out.push((to, p)),
                    }
                }
                out
            }
        }
    }

    fn check(&self) -> Result<(), PomdpError> {
        let bad = |m: String| Err(PomdpError::Schema(format!("{}: {m}", self.name)));
        if self.width == 0 || self.height == 0 {
            return bad("empty grid".into());
        }
        let cells = self
            .labels
            .iter()
            .map(|l| l.cell)
            .chain(self.rewards.iter().map(|r| r.cell))
            .chain([self.start]);
        for c in cells {
            if !self.inside(c) {
                return bad(format!("cell {c:?} lies outside the grid"));
            }
        }
        if let Motion::Stochastic { p_intend } = self.motion {
            if !(0.0..=1.0).contains(&p_intend) {
                return bad(format!("p_intend {p_intend} is not a probability"));
            }
        }
        if let Sensor::PredicateProximity { candidates, close_prob, .. } = &self.sensor {
            if candidates.is_empty() || candidates.len() != close_prob.len() {
                return bad("one close probability per candidate is needed".into());
            }
            if let Some(c) = candidates.iter().find(|c| !self.inside(**c)) {
                return bad(format!("candidate {c:?} lies outside the grid"));
            }
            if close_prob.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return bad("close probabilities must lie in [0, 1]".into());
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<LabeledPomdp, PomdpError> {
        self.check()?;
        let alphabet = Alphabet::from_names(&self.atoms)?;
        let h = self.hypotheses();
        let n = self.n_cells() * h;
        let cell_name = |c: Cell| format!("c{}_{}", c[0], c[1]);
        let states: Vec<String> = (0..n)
            .map(|s| {
                let c = self.cell_of_state(s);
                if h == 1 {
                    cell_name(c)
                } else {
                    format!("{}_h{}", cell_name(c), s % h)
                }
            })
            .collect();
        let observations: Vec<String> = match &self.sensor {
            Sensor::NoisyLocation { .. } => (0..self.n_cells()).map(|i| cell_name(self.cell_of(i))).collect(),
            Sensor::PredicateProximity { .. } => vec!["F".into(), "C".into()],
        };
        let mut b = PomdpBuilder::new(
            self.name.clone(),
            states,
            ACTIONS.iter().map(|a| a.to_string()).collect(),
            observations,
            alphabet.clone(),
            StoppingModel::Geometric { gamma: self.gamma },
        )?;
        let start = self.cell_index(self.start);
        for k in 0..h {
            b.initial(start * h + k, 1.0 / h as f64);
        }
        let scale = if self.normalize_rewards { 1.0 - self.gamma } else { 1.0 };
        for s in 0..n {
            let c = self.cell_of_state(s);
            let mut atoms: Vec<&str> = Vec::new();
            for l in self.labels.iter().filter(|l| l.cell == c) {
                atoms.extend(l.atoms.iter().map(String::as_str));
            }
            if let Sensor::PredicateProximity { atom, candidates, .. } = &self.sensor {
                if candidates[s % h] == c {
                    atoms.push(atom);
                }
            }
            b.label(s, alphabet.letter(&atoms)?);
            let r: f64 = self.rewards.iter().filter(|r| r.cell == c).map(|r| r.value).sum();
            if r != 0.0 {
                b.state_reward(s, r * scale);
            }
            for a in 0..ACTIONS.len() {
                for (to, p) in self.motion(c, a) {
                    b.transition(s, a, self.cell_index(to) * h + s % h, p);
                }
            }
            match &self.sensor {
                Sensor::NoisyLocation { include_self } => {
                    let mut near: Vec<Cell> = (0..4)
                        .map(|d| self.step(c, d))
                        .filter(|&n| n != c)
                        .collect();
                    if *include_self || near.is_empty() {
                        near.push(c);
                    }
                    let p = 1.0 / near.len() as f64;
                    for nc in near {
                        b.observe(s, self.cell_index(nc), p);
                    }
                }
                Sensor::PredicateProximity { candidates, close_prob, .. } => {
                    let t = candidates[s % h];
                    let dist = c[0].abs_diff(t[0]) + c[1].abs_diff(t[1]);
                    let close = if dist <= 1 { close_prob[s % h] } else { 0.0 };
                    if close < 1.0 {
                        b.observe(s, 0, 1.0 - close);
                    }
                    if close > 0.0 {
                        b.observe(s, 1, close);
                    }
                }
            }
        }
        b.build()
    }

    /// ASCII picture of the grid, top row first, with `@` at `agent`.
    pub fn render(&self, agent: Cell) -> String {
        let mut out = String::new();
        for row in (0..self.height).rev() {
            for col in 0..self.width {
                let c = [col, row];
                let hidden = match &self.sensor {
                    Sensor::PredicateProximity { candidates, .. } => candidates.contains(&c),
                    Sensor::NoisyLocation { .. } => false,
                };
                let glyph = if c == agent {
                    "@".to_string()
                } else if let Some(l) = self.labels.iter().find(|l| l.cell == c) {
                    l.atoms.join("")
                } else if hidden {
                    "?".to_string()
                } else {
                    ".".to_string()
                };
                out.push_str(&format!("{glyph:>2}"));
            }
            out.push('\n');
        }
        out
    }
}
