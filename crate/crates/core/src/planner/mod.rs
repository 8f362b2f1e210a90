//! Lagrangian planning under a specification-satisfaction constraint.
//!
//! The multiplier `λ ∈ (0, B)` is driven by an exponentiated-gradient rule;
//! every iterate is an unconstrained solve of the scalarized product.

mod bfs;
mod eval;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pomdp::{mix_seed, DiscretePomdp, PolicyError, PomdpError, StoppingModel};
use crate::product::ProductPomdp;
use crate::solver::{
    expand_beliefs, solve_discounted_on, solve_discounted_warm, solve_finite_horizon, AlphaPolicy,
    AlphaVector, Solution, SolverConfig, SolverError,
};

pub use bfs::{reduce_support_bfs, BfsResult};
pub use eval::{
    exact_evaluate, mc_evaluate, mc_evaluate_mixed, open_loop_final_series, McEstimate,
    MixedPolicy,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlannerError {
    #[error("invalid problem: {0}")]
    Config(String),
    #[error("scalarization needs {expected} stopping, model has {got}")]
    Stopping { expected: &'static str, got: String },
    #[error("infeasible: best candidate satisfaction {best} is below {required}")]
    Infeasible { best: f64, required: f64 },
    #[error("mixture weights: {0}")]
    Weights(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Model(#[from] PomdpError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Learning rate: a fixed value, or `sqrt(ln 2 / (2 K B²))` when unset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstrainedProblem {
    /// Required satisfaction probability `1 - δ`.
    pub threshold: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(default)]
    pub eta: Option<f64>,
    /// Rollouts per iterate evaluation.
    pub simu: usize,
    /// Rollouts for the final mixture estimates.
    #[serde(default = "default_eval_rollouts")]
    pub eval_rollouts: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// BFS constraint slack; defaults to `2 sqrt(2 ln 2 / K)`.
    #[serde(default)]
    pub bfs_slack: Option<f64>,
}

fn default_eval_rollouts() -> usize {
    200
}

impl ConstrainedProblem {
    pub fn new(threshold: f64, b: f64, k: usize, simu: usize) -> Self {
        ConstrainedProblem {
            threshold,
            b,
            k,
            eta: None,
            simu,
            eval_rollouts: default_eval_rollouts(),
            base_seed: 0,
            bfs_slack: None,
        }
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        let bad = |m: &str| Err(PlannerError::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad("threshold must lie in [0, 1]");
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return bad("B must be positive");
        }
        if self.k == 0 {
            return bad("K must be at least 1");
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0 && eta.is_finite()) {
                return bad("eta must be positive");
            }
        }
        if self.simu == 0 || self.eval_rollouts == 0 {
            return bad("rollout counts must be at least 1");
        }
        if let Some(s) = self.bfs_slack {
            if !(s >= 0.0) {
                return bad("BFS slack must be nonnegative");
            }
        }
        Ok(())
    }

    pub fn resolved_eta(&self) -> f64 {
        self.eta.unwrap_or_else(|| auto_eta(self.k, self.b))
    }

    pub fn resolved_slack(&self) -> f64 {
        self.bfs_slack.unwrap_or_else(|| regret_bound(self.k, 1.0))
    }
}

pub fn auto_eta(k: usize, b: f64) -> f64 {
    (std::f64::consts::LN_2 / (2.0 * k as f64 * b * b)).sqrt()
}

/// `2 B sqrt(2 ln 2 / K)`.
pub fn regret_bound(k: usize, b: f64) -> f64 {
    2.0 * b * (2.0 * std::f64::consts::LN_2 / k as f64).sqrt()
}

/// The Lagrangian at a fixed multiplier as an ordinary planning problem.
/// `L(μ, λ) = value + offset`.
#[derive(Debug, Clone, PartialEq)]
pub enum Scalarized {
    Discounted {
        gamma: f64,
        reward: Vec<f64>,
        offset: f64,
    },
    FiniteHorizon {
        horizon: usize,
        reward: Vec<f64>,
        terminal: Vec<f64>,
        offset: f64,
    },
}

impl Scalarized {
    pub fn offset(&self) -> f64 {
        match self {
            Scalarized::Discounted { offset, .. } | Scalarized::FiniteHorizon { offset, .. } => {
                *offset
            }
        }
    }

    pub fn solve<M: DiscretePomdp + ?Sized>(
        &self,
        m: &M,
        cfg: &SolverConfig,
    ) -> Result<Solution, SolverError> {
        match self {
            Scalarized::Discounted { gamma, reward, .. } => {
                let beliefs = expand_beliefs(m, cfg);
                solve_discounted_on(m, reward, *gamma, cfg, &beliefs)
            }
            Scalarized::FiniteHorizon {
                horizon,
                reward,
                terminal,
                ..
            } => solve_finite_horizon(m, reward, Some(terminal), *horizon, cfg),
        }
    }
}

fn base_rewards(prod: &ProductPomdp) -> Vec<f64> {
    let na = prod.n_actions();
    (0..prod.n_states() * na)
        .map(|i| prod.reward(i / na, i % na))
        .collect()
}

/// Folds `λ r^f` into the reward. Under geometric stopping the terminal
/// indicator becomes the per-step bonus `λ (1 - γ) / γ · r^f`; under a
/// fixed horizon it stays a terminal reward.
pub fn scalarize(prod: &ProductPomdp, lambda: f64, threshold: f64) -> Scalarized {
    let mut reward = base_rewards(prod);
    let na = prod.n_actions();
    match prod.stopping() {
        StoppingModel::Geometric { gamma } => {
            let c = lambda * (1.0 - gamma) / gamma;
            for (i, r) in reward.iter_mut().enumerate() {
                *r += c * prod.final_reward(i / na);
            }
            let q0 = prod.dfa().initial();
            let accepting_start = if prod.dfa().is_accepting(q0) { 1.0 } else { 0.0 };
            Scalarized::Discounted {
                gamma,
                reward,
                offset: -c * accepting_start - lambda * threshold,
            }
        }
        StoppingModel::Fixed { horizon } => Scalarized::FiniteHorizon {
            horizon,
            reward,
            terminal: prod.final_rewards().iter().map(|f| lambda * f).collect(),
            offset: -lambda * threshold,
        },
    }
}

/// `λ' = B λ e^{-η g} / (B + λ (e^{-η g} - 1))` with `g = p̂ - threshold`,
/// evaluated as a logistic step on `logit(λ / B)`.
pub fn eg_update_lambda(lambda: f64, p_hat: f64, eta: f64, b: f64, threshold: f64) -> f64 {
    let step = eta * (p_hat - threshold);
    if step == 0.0 {
        return lambda;
    }
    let z = lambda.ln() - (b - lambda).ln() - step;
    let u = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    (b * u).clamp(b * f64::MIN_POSITIVE, b * (1.0 - f64::EPSILON))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub lambda: f64,
    pub r_hat: f64,
    pub p_hat: f64,
    pub r_se: f64,
    pub p_se: f64,
    /// Lagrangian at `λ_k` from the solver's own value.
    pub lagrangian: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub regret_bound: f64,
    /// Solver value at `λ = 0`; a lower estimate of the best achievable
    /// reward.
    pub r_m_estimate: f64,
    /// `(R_m - R̂(μ̄) + bound) / B` with the achieved reward standing in for
    /// the optimum.
    pub eps_f_surrogate: f64,
    pub bfs_slack: f64,
    pub bfs: Option<BfsResult>,
    pub bfs_error: Option<String>,
    pub bfs_estimate: Option<McEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgResult {
    pub problem: ConstrainedProblem,
    pub eta: f64,
    pub iterations: Vec<IterationRecord>,
    pub lambda_bar: f64,
    /// Weights of the uniform mixture over `policies`.
    pub mixture_weights: Vec<f64>,
    pub mixture_estimate: McEstimate,
    pub diagnostics: Diagnostics,
    #[serde(skip)]
    pub policies: Vec<AlphaPolicy>,
    #[serde(skip)]
    pub timing: Timing,
}

/// Wall-clock seconds, kept out of serialized results.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timing {
    pub solve_s: f64,
    pub simulate_s: f64,
}

impl EgResult {
    pub fn mixture(&self) -> MixedPolicy<&AlphaPolicy> {
        MixedPolicy {
            support: self.policies.iter().collect(),
            weights: self.mixture_weights.clone(),
        }
    }

    /// The BFS-reduced mixture, when the reduction succeeded.
    pub fn reduced_mixture(&self) -> Option<MixedPolicy<&AlphaPolicy>> {
        let bfs = self.diagnostics.bfs.as_ref()?;
        let (support, weights) = bfs
            .weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .map(|(i, &w)| (&self.policies[i], w))
            .unzip();
        Some(MixedPolicy { support, weights })
    }
}

// Seed streams below `k` index iterates; these tag the remaining ones.
const MIXTURE_STREAM: u64 = u64::MAX;
const BFS_STREAM: u64 = u64::MAX - 1;

/// Runs the exponentiated-gradient loop for `problem.k` iterations from
/// `λ_1 = B / 2`.
pub fn eg_solve(
    prod: &ProductPomdp,
    problem: &ConstrainedProblem,
    cfg: &SolverConfig,
) -> Result<EgResult, PlannerError> {
    problem.validate()?;
    cfg.validate()?;
    let eta = problem.resolved_eta();
    let b = problem.b;
    let beliefs = match prod.stopping() {
        StoppingModel::Geometric { .. } => Some(expand_beliefs(prod, cfg)),
        StoppingModel::Fixed { .. } => None,
    };
    // Discounted iterates start from the previous vectors, lowered by
    // `max(0, λ_prev - λ) / γ` so they stay below the new optimum.
    let solve = |lambda: f64, prev: Option<(f64, &AlphaPolicy)>| -> Result<(Solution, f64), PlannerError> {
        let sc = scalarize(prod, lambda, problem.threshold);
        let sol = match (&sc, &beliefs, prev) {
            (
                Scalarized::Discounted { gamma, reward, .. },
                Some(bs),
                Some((prev_lambda, AlphaPolicy::Stationary { vectors, .. })),
            ) => {
                let drop = (prev_lambda - lambda).max(0.0) / gamma;
                let init = vectors
                    .iter()
                    .map(|v| AlphaVector {
                        action: v.action,
                        values: v.values.iter().map(|x| x - drop).collect(),
                    })
                    .collect();
                solve_discounted_warm(prod, reward, *gamma, cfg, bs, init)?
            }
            (Scalarized::Discounted { gamma, reward, .. }, Some(bs), _) => {
                solve_discounted_on(prod, reward, *gamma, cfg, bs)?
            }
            _ => sc.solve(prod, cfg)?,
        };
        Ok((sol, sc.offset()))
    };

    let mut timing = Timing::default();
    let mut lambda = b / 2.0;
    let mut iterations = Vec::with_capacity(problem.k);
    let mut policies = Vec::with_capacity(problem.k);
    for k in 0..problem.k {
        assert!(lambda > 0.0 && lambda < b, "multiplier left (0, B): {lambda}");
        let t0 = Instant::now();
        let prev = iterations.last().map(|r: &IterationRecord| r.lambda).zip(policies.last());
        let (sol, offset) = solve(lambda, prev)?;
        let t1 = Instant::now();
        let est = mc_evaluate(prod, &sol.policy, problem.simu, mix_seed(problem.base_seed, k as u64))?;
        timing.solve_s += (t1 - t0).as_secs_f64();
        timing.simulate_s += t1.elapsed().as_secs_f64();
        iterations.push(IterationRecord {
            k: k + 1,
            lambda,
            r_hat: est.r_hat,
            p_hat: est.p_hat,
            r_se: est.r_se,
            p_se: est.p_se,
            lagrangian: sol.value + offset,
            converged: sol.stats.converged,
        });
        policies.push(sol.policy);
        lambda = eg_update_lambda(lambda, est.p_hat, eta, b, problem.threshold);
    }
    let lambda_bar = iterations.iter().map(|r| r.lambda).sum::<f64>() / problem.k as f64;
    let mixture_weights = vec![1.0 / problem.k as f64; problem.k];
    let uniform = MixedPolicy {
        support: policies.iter().collect(),
        weights: mixture_weights.clone(),
    };
    let t1 = Instant::now();
    let mixture_estimate = mc_evaluate_mixed(
        prod,
        &uniform,
        problem.eval_rollouts,
        mix_seed(problem.base_seed, MIXTURE_STREAM),
    )?;
    timing.simulate_s += t1.elapsed().as_secs_f64();
    let t0 = Instant::now();
    let (unconstrained, _) = solve(0.0, None)?;
    timing.solve_s += t0.elapsed().as_secs_f64();
    let bound = regret_bound(problem.k, b);
    let slack = problem.resolved_slack();
    let candidates: Vec<(f64, f64)> = iterations.iter().map(|r| (r.r_hat, r.p_hat)).collect();
    let (bfs, bfs_error, bfs_estimate) =
        match reduce_support_bfs(&candidates, problem.threshold, slack) {
            Ok(res) => {
                let (support, weights): (Vec<&AlphaPolicy>, Vec<f64>) = res
                    .weights
                    .iter()
                    .enumerate()
                    .filter(|(_, &w)| w > 0.0)
                    .map(|(i, &w)| (&policies[i], w))
                    .unzip();
                let est = mc_evaluate_mixed(
                    prod,
                    &MixedPolicy { support, weights },
                    problem.eval_rollouts,
                    mix_seed(problem.base_seed, BFS_STREAM),
                )?;
                (Some(res), None, Some(est))
            }
            Err(e) => (None, Some(e.to_string()), None),
        };
    let diagnostics = Diagnostics {
        regret_bound: bound,
        r_m_estimate: unconstrained.value,
        eps_f_surrogate: (unconstrained.value - mixture_estimate.r_hat + bound) / b,
        bfs_slack: slack,
        bfs,
        bfs_error,
        bfs_estimate,
    };
    Ok(EgResult {
        problem: problem.clone(),
        eta,
        iterations,
        lambda_bar,
        mixture_weights,
        mixture_estimate,
        diagnostics,
        policies,
        timing,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub lambda: f64,
    pub r_hat: f64,
    pub p_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Report {
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub bound: f64,
    pub r_hat: f64,
    pub p_hat: f64,
    pub threshold: f64,
    pub r_m_estimate: f64,
    pub eps_f_surrogate: f64,
    pub trace: Vec<TraceRow>,
}

pub fn theorem2_report(result: &EgResult) -> Theorem2Report {
    let p = &result.problem;
    Theorem2Report {
        b: p.b,
        k: p.k,
        bound: result.diagnostics.regret_bound,
        r_hat: result.mixture_estimate.r_hat,
        p_hat: result.mixture_estimate.p_hat,
        threshold: p.threshold,
        r_m_estimate: result.diagnostics.r_m_estimate,
        eps_f_surrogate: result.diagnostics.eps_f_surrogate,
        trace: result
            .iterations
            .iter()
            .map(|r| TraceRow {
                k: r.k,
                lambda: r.lambda,
                r_hat: r.r_hat,
                p_hat: r.p_hat,
            })
            .collect(),
    }
}

/// Writes the iteration trace as CSV with columns `k, lambda, r_hat, p_hat`.
pub fn write_trace_csv<W: std::io::Write>(out: W, rows: &[TraceRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn update_matches_closed_form() {
        let direct = |l: f64, p: f64, eta: f64, b: f64, thr: f64| {
            let e = (-eta * (p - thr)).exp();
            b * l * e / (b + l * (e - 1.0))
        };
        let got = eg_update_lambda(1.0, 0.0, 1.0, 2.0, 1.0);
        let want = 2.0 * std::f64::consts::E / (1.0 + std::f64::consts::E);
        assert!((got - want).abs() < 1e-12);
        assert!((got - 1.46212).abs() < 1e-5);
        for &(l, p, eta, b, thr) in &[(2.5, 0.3, 2.0, 5.0, 0.75), (0.1, 0.9, 0.02, 20.0, 0.85), (7.0, 1.0, 0.2, 10.0, 0.75)] {
            let a = eg_update_lambda(l, p, eta, b, thr);
            assert!((a - direct(l, p, eta, b, thr)).abs() < 1e-12 * b);
        }
    }

    #[test]
    fn update_is_overflow_safe_and_confined() {
        for &step in &[-1e6, -800.0, 800.0, 1e6] {
            let l = eg_update_lambda(2.5, step, 1.0, 5.0, 0.0);
            assert!(l > 0.0 && l < 5.0 && l.is_finite(), "{step}: {l}");
        }
        assert_eq!(eg_update_lambda(1.234, 0.75, 2.0, 5.0, 0.75), 1.234);
    }

    #[test]
    fn bound_and_eta_arithmetic() {
        assert!((regret_bound(100, 5.0) - 1.17741).abs() < 1e-5);
        assert!((regret_bound(400, 5.0) * 2.0 - regret_bound(100, 5.0)).abs() < 1e-12);
        assert!((regret_bound(400, 4.0) - 0.471).abs() < 1e-3);
        assert!((auto_eta(100, 5.0) - 0.011774).abs() < 1e-6);
        let mut p = ConstrainedProblem::new(0.75, 5.0, 100, 200);
        assert_eq!(p.resolved_eta(), auto_eta(100, 5.0));
        p.eta = Some(2.0);
        assert_eq!(p.resolved_eta(), 2.0);
        assert!((p.resolved_slack() - regret_bound(100, 1.0)).abs() < 1e-15);
    }

    #[test]
    fn problem_validation() {
        let ok = ConstrainedProblem::new(0.75, 5.0, 100, 200);
        assert!(ok.validate().is_ok());
        for bad in [
            ConstrainedProblem { k: 0, ..ok.clone() },
            ConstrainedProblem { b: 0.0, ..ok.clone() },
            ConstrainedProblem { threshold: 1.5, ..ok.clone() },
            ConstrainedProblem { eta: Some(-1.0), ..ok.clone() },
            ConstrainedProblem { simu: 0, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn trace_csv_header() {
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &[TraceRow { k: 1, lambda: 2.5, r_hat: 1.0, p_hat: 0.5 }]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "k,lambda,r_hat,p_hat");
        assert_eq!(text.lines().nth(1).unwrap(), "1,2.5,1.0,0.5");
    }
}
