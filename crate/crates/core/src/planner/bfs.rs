use serde::{Deserialize, Serialize};

use super::PlannerError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BfsResult {
    /// One weight per candidate, at most two nonzero.
    pub weights: Vec<f64>,
    pub objective: f64,
    pub constraint: f64,
}

impl BfsResult {
    pub fn support_size(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0.0).count()
    }
}

/// Best mixture of the candidates `(R̂_k, p̂_k)` subject to
/// `Σ w_k p̂_k ≥ threshold - slack`, `Σ w_k = 1`, `w ≥ 0`. The optimum is
/// attained at a vertex with at most two nonzero weights; all of them are
/// enumerated.
pub fn reduce_support_bfs(
    candidates: &[(f64, f64)],
    threshold: f64,
    slack: f64,
) -> Result<BfsResult, PlannerError> {
    if candidates.is_empty() {
        return Err(PlannerError::Config("no candidates to reduce".into()));
    }
    if !(slack >= 0.0) {
        return Err(PlannerError::Config("BFS slack must be nonnegative".into()));
    }
    let tau = threshold - slack;
    let best_p = candidates.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    if best_p < tau {
        return Err(PlannerError::Infeasible {
            best: best_p,
            required: tau,
        });
    }
    // (objective, i, w_i, j, w_j)
    let mut best: Option<(f64, usize, f64, usize, f64)> = None;
    let mut consider = |obj: f64, i: usize, wi: f64, j: usize, wj: f64| {
        if best.map_or(true, |b| obj > b.0) {
            best = Some((obj, i, wi, j, wj));
        }
    };
    for (i, &(r, p)) in candidates.iter().enumerate() {
        if p >= tau {
            consider(r, i, 1.0, i, 0.0);
        }
    }
    for (i, &(ri, pi)) in candidates.iter().enumerate() {
        for (j, &(rj, pj)) in candidates.iter().enumerate().skip(i + 1) {
            // Constraint tight: w_i p_i + (1 - w_i) p_j = tau.
            if pi == pj {
                continue;
            }
            let wi = (tau - pj) / (pi - pj);
            if wi > 0.0 && wi < 1.0 {
                consider(wi * ri + (1.0 - wi) * rj, i, wi, j, 1.0 - wi);
            }
        }
    }
    let (objective, i, wi, j, wj) = best.expect("a feasible vertex exists");
    let mut weights = vec![0.0; candidates.len()];
    weights[i] += wi;
    weights[j] += wj;
    let constraint = weights.iter().zip(candidates).map(|(w, c)| w * c.1).sum();
    Ok(BfsResult {
        weights,
        objective,
        constraint,
    })
}
