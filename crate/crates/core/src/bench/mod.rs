//! The gridworld benchmark suite: models M1–M9, specifications φ1–φ6 and
//! the hyperparameter presets of the experiment matrix.

mod grid;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use grid::{CellLabel, CellReward, GridSpec, Motion, Sensor, ACTIONS};

use crate::dfa::{compile_minimal_dfa, CompileOptions, Dfa};
use crate::ltlf::{parse_formula, Alphabet, AtomSource};
use crate::planner::{eg_solve, ConstrainedProblem, EgResult};
use crate::pomdp::{DiscretePomdp, LabeledPomdp, PomdpBuilder, StoppingModel, Trajectory};
use crate::product::{build_product, ProductPomdp};
use crate::solver::SolverConfig;
use crate::Error;

pub const MODEL_NAMES: [&str; 9] = ["M1", "M2", "M3", "M4", "M5", "M6", "M7", "M8", "M9"];
pub const SPEC_NAMES: [&str; 6] = ["phi1", "phi2", "phi3", "phi4", "phi5", "phi6"];

/// Formula text of a named specification. `phi6` reads "a X b" as
/// `a & X b`.
pub fn make_spec(name: &str) -> Result<&'static str, Error> {
    Ok(match name {
        "phi1" => "F a & G !b",
        "phi2" => "F (a & F b)",
        "phi3" => "F (a & F (b & F c))",
        "phi4" => "!b U (a & F b)",
        "phi5" => "F (a | b) & G (b -> (!d U c))",
        "phi6" => "F a & G ((a & X b -> F c) & (a & X !b -> F d))",
        _ => return Err(Error::UnknownName { kind: "spec", name: name.into() }),
    })
}

fn label(cell: [usize; 2], atom: &str) -> CellLabel {
    CellLabel { cell, atoms: vec![atom.to_string()] }
}

fn reward(cell: [usize; 2], value: f64) -> CellReward {
    CellReward { cell, value }
}

fn atoms(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn location_grid(name: &str, size: usize, atom_names: &[&str], labels: Vec<CellLabel>, rewards: Vec<CellReward>) -> GridSpec {
    GridSpec {
        name: name.to_string(),
        width: size,
        height: size,
        atoms: atoms(atom_names),
        labels,
        rewards,
        motion: Motion::Stochastic { p_intend: 0.95 },
        sensor: Sensor::NoisyLocation { include_self: false },
        start: [0, 0],
        gamma: 0.99,
        normalize_rewards: true,
    }
}

fn hidden_object_grid(name: &str, rewards: Vec<CellReward>) -> GridSpec {
    GridSpec {
        name: name.to_string(),
        width: 4,
        height: 4,
        atoms: atoms(&["a", "b"]),
        labels: vec![label([2, 2], "a")],
        rewards,
        motion: Motion::Deterministic,
        sensor: Sensor::PredicateProximity {
            atom: "b".into(),
            candidates: vec![[3, 0], [0, 3]],
            close_prob: vec![0.9, 0.1],
        },
        start: [0, 0],
        gamma: 0.99,
        normalize_rewards: true,
    }
}

/// Default layout of a named model. Cells not pinned down in the source
/// prose are defaults and can be edited in the returned spec.
pub fn grid_spec(name: &str) -> Result<GridSpec, Error> {
    Ok(match name {
        "M1" => location_grid(
            "M1",
            4,
            &["a", "b"],
            vec![label([1, 2], "b"), label([3, 3], "a")],
            vec![reward([0, 3], 2.0), reward([3, 3], 1.0)],
        ),
        "M2" => location_grid(
            "M2",
            8,
            &["a", "b"],
            vec![label([7, 7], "a"), label([5, 3], "b"), label([1, 5], "b")],
            vec![reward([1, 6], 3.0), reward([4, 3], 3.0), reward([7, 7], 1.0)],
        ),
        "M3" => location_grid(
            "M3",
            4,
            &["a", "b"],
            vec![label([0, 3], "a"), label([3, 0], "b")],
            vec![reward([3, 3], 1.0)],
        ),
        "M4" => location_grid(
            "M4",
            4,
            &["a", "b", "c"],
            vec![label([0, 3], "a"), label([3, 0], "b"), label([2, 2], "c")],
            vec![reward([3, 3], 1.0)],
        ),
        "M5" => location_grid(
            "M5",
            4,
            &["a", "b"],
            vec![label([0, 3], "a"), label([2, 1], "b")],
            vec![reward([3, 3], 1.0)],
        ),
        "M6" => location_grid(
            "M6",
            4,
            &["a", "b", "c", "d"],
            vec![label([3, 0], "a"), label([3, 3], "b"), label([0, 3], "c"), label([2, 3], "d")],
            vec![reward([3, 0], 1.0), reward([3, 3], 2.0)],
        ),
        "M7" => location_grid(
            "M7",
            4,
            &["a", "b", "c", "d"],
            vec![label([1, 2], "a"), label([2, 2], "b"), label([3, 0], "c"), label([0, 3], "d")],
            vec![reward([3, 0], 5.0), reward([0, 3], 2.0)],
        ),
        "M8" => hidden_object_grid("M8", vec![reward([3, 0], 2.0), reward([0, 3], 4.0)]),
        "M9" => hidden_object_grid("M9", vec![reward([0, 0], 2.0)]),
        _ => return Err(Error::UnknownName { kind: "model", name: name.into() }),
    })
}

pub fn make_model(name: &str) -> Result<LabeledPomdp, Error> {
    Ok(grid_spec(name)?.build()?)
}

/// Three states in a row under a single action: `s0 → s1` and `s1 → s2`
/// each with probability 1/2, `s2` absorbing and labelled `a`. Geometric
/// stopping with γ = 0.9.
pub fn chain3() -> LabeledPomdp {
    let names = |p: &str| (0..3).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
    let mut b = PomdpBuilder::new(
        "chain3",
        names("s"),
        vec!["go".into()],
        vec!["o".into()],
        Alphabet::from_names(&["a"]).expect("valid atom"),
        StoppingModel::Geometric { gamma: 0.9 },
    )
    .expect("valid chain");
    b.initial(0, 1.0);
    b.transition(0, 0, 0, 0.5).transition(0, 0, 1, 0.5);
    b.transition(1, 0, 1, 0.5).transition(1, 0, 2, 0.5);
    b.transition(2, 0, 2, 1.0);
    b.label(2, crate::ltlf::Letter(1));
    b.state_reward(1, 1.0);
    for s in 0..3 {
        b.observe(s, 0, 1.0);
    }
    b.build().expect("valid chain")
}

pub const CHAIN3_SPEC: &str = "F a";

/// Models shipped with the crate, paired with a specification over their
/// atoms.
pub fn bundled_models() -> Vec<(LabeledPomdp, &'static str)> {
    let mut out = vec![(chain3(), CHAIN3_SPEC)];
    for (m, s) in [("M1", "phi1"), ("M3", "phi2"), ("M6", "phi5"), ("M8", "phi1")] {
        out.push((make_model(m).expect("bundled model"), make_spec(s).expect("bundled spec")));
    }
    out
}

/// Parses `spec` over the model's atoms and compiles the minimal DFA.
pub fn compile_for(model: &LabeledPomdp, spec: &str) -> Result<Dfa, Error> {
    let f = parse_formula(spec, AtomSource::Explicit(model.alphabet()))?;
    Ok(compile_minimal_dfa(&f, CompileOptions::default())?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub model: String,
    pub spec: String,
    pub threshold: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub eta: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub simu: usize,
}

/// Hyperparameters of the experiment row for `model`.
pub fn preset(model: &str) -> Result<Preset, Error> {
    let (spec, threshold, b, eta, k, simu) = match model {
        "M1" => ("phi1", 0.75, 5.0, 2.0, 100, 200),
        "M2" => ("phi1", 0.70, 8.0, 2.0, 50, 100),
        "M3" => ("phi2", 0.75, 5.0, 2.0, 100, 200),
        "M4" => ("phi3", 0.70, 6.0, 2.0, 100, 200),
        "M5" => ("phi4", 0.70, 6.0, 2.0, 100, 200),
        "M6" => ("phi5", 0.80, 10.0, 2.0, 100, 200),
        "M7" => ("phi6", 0.80, 25.0, 2.0, 50, 100),
        "M8" => ("phi1", 0.85, 20.0, 0.02, 100, 200),
        "M9" => ("phi4", 0.75, 10.0, 0.2, 100, 200),
        _ => return Err(Error::UnknownName { kind: "model", name: model.into() }),
    };
    Ok(Preset {
        model: model.into(),
        spec: spec.into(),
        threshold,
        b,
        eta,
        k,
        simu,
    })
}

/// Per-run changes to a preset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub spec: Option<String>,
    pub threshold: Option<f64>,
    #[serde(rename = "B")]
    pub b: Option<f64>,
    pub eta: Option<f64>,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    pub simu: Option<usize>,
    pub seed: Option<u64>,
    pub eval_rollouts: Option<usize>,
    pub solver: Option<SolverConfig>,
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub model: String,
    pub spec: String,
    pub problem: ConstrainedProblem,
    pub solver: SolverConfig,
}

pub fn plan_experiment(model: &str, overrides: &Overrides) -> Result<Experiment, Error> {
    let p = preset(model)?;
    let spec = overrides.spec.clone().unwrap_or(p.spec);
    make_spec(&spec)?;
    let problem = ConstrainedProblem {
        threshold: overrides.threshold.unwrap_or(p.threshold),
        b: overrides.b.unwrap_or(p.b),
        k: overrides.k.unwrap_or(p.k),
        eta: Some(overrides.eta.unwrap_or(p.eta)),
        simu: overrides.simu.unwrap_or(p.simu),
        eval_rollouts: overrides.eval_rollouts.unwrap_or(200),
        base_seed: overrides.seed.unwrap_or(0),
        bfs_slack: None,
    };
    problem.validate()?;
    Ok(Experiment {
        model: model.into(),
        spec,
        problem,
        solver: overrides.solver.clone().unwrap_or_default(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub model: String,
    pub spec: String,
    #[serde(rename = "S")]
    pub n_states: usize,
    #[serde(rename = "Q")]
    pub n_automaton_states: usize,
    pub r_hat: Option<f64>,
    pub p_hat: Option<f64>,
    pub threshold: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub eta: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub simu: usize,
    pub seed: u64,
    pub t_solve_s: f64,
    pub t_simu_s: f64,
    pub t_total_s: f64,
    pub error: String,
}

impl BenchRow {
    fn planned(e: &Experiment) -> Self {
        BenchRow {
            model: e.model.clone(),
            spec: e.spec.clone(),
            n_states: 0,
            n_automaton_states: 0,
            r_hat: None,
            p_hat: None,
            threshold: e.problem.threshold,
            b: e.problem.b,
            eta: e.problem.resolved_eta(),
            k: e.problem.k,
            simu: e.problem.simu,
            seed: e.problem.base_seed,
            t_solve_s: 0.0,
            t_simu_s: 0.0,
            t_total_s: 0.0,
            error: String::new(),
        }
    }
}

pub struct ExperimentOutcome {
    pub row: BenchRow,
    pub product: Option<ProductPomdp>,
    pub result: Option<EgResult>,
}

/// Builds the product for an experiment; unreachable pairs are pruned.
pub fn experiment_product(e: &Experiment) -> Result<ProductPomdp, Error> {
    let model = make_model(&e.model)?;
    let dfa = compile_for(&model, make_spec(&e.spec)?)?;
    Ok(build_product(&model, &dfa)?.pruned())
}

/// Compiles, builds the product and runs the planner. Failures are recorded
/// in the row's `error` field.
pub fn run_experiment(e: &Experiment) -> ExperimentOutcome {
    let start = Instant::now();
    let mut row = BenchRow::planned(e);
    let product = match experiment_product(e) {
        Ok(p) => p,
        Err(err) => {
            row.error = err.to_string();
            row.t_total_s = start.elapsed().as_secs_f64();
            return ExperimentOutcome { row, product: None, result: None };
        }
    };
    row.n_states = product.base().n_states();
    row.n_automaton_states = product.n_automaton_states();
    let result = eg_solve(&product, &e.problem, &e.solver);
    let result = match result {
        Ok(r) => r,
        Err(err) => {
            row.error = Error::from(err).to_string();
            row.t_total_s = start.elapsed().as_secs_f64();
            return ExperimentOutcome { row, product: Some(product), result: None };
        }
    };
    row.r_hat = Some(result.mixture_estimate.r_hat);
    row.p_hat = Some(result.mixture_estimate.p_hat);
    row.t_simu_s = result.timing.simulate_s;
    row.t_solve_s = result.timing.solve_s;
    row.t_total_s = start.elapsed().as_secs_f64();
    ExperimentOutcome { row, product: Some(product), result: Some(result) }
}

pub fn write_rows_csv<W: std::io::Write>(out: W, rows: &[BenchRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Trajectory as CSV with columns `t, s, q, a, o, r`, plus the terminal
/// state on a last row without action.
pub fn trajectory_csv(prod: &ProductPomdp, run: &Trajectory) -> String {
    let base = prod.base();
    let mut out = String::from("t,s,q,a,o,r\n");
    for (t, step) in run.steps.iter().enumerate() {
        let (s, q) = prod.pair(step.state);
        out.push_str(&format!(
            "{t},{},{q},{},{},{}\n",
            base.state_names()[s],
            base.action_names()[step.action],
            base.obs_names()[step.obs],
            step.reward
        ));
    }
    let (s, q) = prod.pair(run.terminal);
    out.push_str(&format!("{},{},{q},,,\n", run.steps.len(), base.state_names()[s]));
    out
}

/// One ASCII frame per step of a product trajectory on `grid`.
pub fn trajectory_frames(grid: &GridSpec, prod: &ProductPomdp, run: &Trajectory) -> String {
    let base = prod.base();
    let mut out = String::new();
    let states = run.steps.iter().map(|s| (s.state, Some(s))).chain([(run.terminal, None)]);
    for (t, (x, step)) in states.enumerate() {
        let (s, q) = prod.pair(x);
        let action = step.map_or("-", |st| base.action_names()[st.action].as_str());
        out.push_str(&format!("t={t} q={q} accepting={} action={action}\n", prod.dfa().is_accepting(q)));
        out.push_str(&grid.render(grid.cell_of_state(s)));
        out.push('\n');
    }
    out
}
