use super::{DiscretePomdp, PomdpError};

/// Posterior over a model's state indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief(Vec<f64>);

impl Belief {
    /// Wraps a distribution; entries must be nonnegative and sum to one.
    pub fn new(probs: Vec<f64>) -> Result<Self, PomdpError> {
        if let Some(&p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(PomdpError::BadProbability {
                what: "belief".into(),
                value: p,
            });
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(PomdpError::Normalization {
                what: "belief".into(),
                sum,
            });
        }
        Ok(Belief(probs))
    }

    pub fn point(n: usize, x: usize) -> Self {
        let mut v = vec![0.0; n];
        v[x] = 1.0;
        Belief(v)
    }

    pub fn from_sparse(n: usize, entries: &[(usize, f64)]) -> Self {
        let mut v = vec![0.0; n];
        for &(x, p) in entries {
            v[x] += p;
        }
        Belief(v)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Indices with positive mass.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.0.iter().copied().enumerate().filter(|&(_, p)| p > 0.0)
    }

    pub fn dot(&self, values: &[f64]) -> f64 {
        self.support().map(|(x, p)| p * values[x]).sum()
    }

    pub fn l1_distance(&self, other: &Belief) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }

    /// Conditions a predicted distribution on `o`; returns the posterior and
    /// `P(o)`.
    pub fn condition<M: DiscretePomdp + ?Sized>(
        m: &M,
        predicted: &[f64],
        o: usize,
    ) -> Result<(Belief, f64), PomdpError> {
        let mut post: Vec<f64> = predicted
            .iter()
            .enumerate()
            .map(|(x, &p)| if p > 0.0 { p * m.obs_prob(x, o) } else { 0.0 })
            .collect();
        let mass: f64 = post.iter().sum();
        if mass <= 0.0 {
            return Err(PomdpError::ImpossibleObservation { obs: o });
        }
        for p in &mut post {
            *p /= mass;
        }
        Ok((Belief(post), mass))
    }
}

/// `b0(s) ∝ ϖ(s) Z(s; o0)`.
pub fn belief_init<M: DiscretePomdp + ?Sized>(m: &M, o0: usize) -> Result<Belief, PomdpError> {
    let prior = Belief::from_sparse(m.n_states(), m.initial());
    Ok(Belief::condition(m, prior.probs(), o0)?.0)
}

/// Predicted next-state distribution `Σ_s P(s, a; ·) b(s)`.
pub fn predict<M: DiscretePomdp + ?Sized>(m: &M, b: &Belief, a: usize) -> Vec<f64> {
    let mut next = vec![0.0; m.n_states()];
    for (x, p) in b.support() {
        for &(y, q) in m.transitions(x, a) {
            next[y] += p * q;
        }
    }
    next
}

/// Bayes filter step `b'(s') ∝ Z(s'; o) Σ_s P(s, a; s') b(s)`.
pub fn belief_update<M: DiscretePomdp + ?Sized>(
    m: &M,
    b: &Belief,
    a: usize,
    o: usize,
) -> Result<Belief, PomdpError> {
    if b.len() != m.n_states() {
        return Err(PomdpError::Dimension {
            expected: m.n_states(),
            got: b.len(),
        });
    }
    Ok(Belief::condition(m, &predict(m, b, a), o)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltlf::Alphabet;
    use crate::pomdp::{LabeledPomdp, PomdpBuilder, StoppingModel};

    // Two states, one action, one or two observations.
    fn two_state(p: [[f64; 2]; 2], z: [[f64; 2]; 2], init: [f64; 2]) -> LabeledPomdp {
        let mut b = PomdpBuilder::new(
            "two",
            vec!["s0".into(), "s1".into()],
            vec!["a".into()],
            vec!["o".into(), "u".into()],
            Alphabet::new([]).unwrap(),
            StoppingModel::Fixed { horizon: 1 },
        )
        .unwrap();
        for s in 0..2 {
            b.initial(s, init[s]);
            for t in 0..2 {
                b.transition(s, 0, t, p[s][t]);
                b.observe(s, t, z[s][t]);
            }
        }
        b.build().unwrap()
    }

    #[test]
    fn init_bayes_rule() {
        let m = two_state([[1.0, 0.0], [0.0, 1.0]], [[0.8, 0.2], [0.4, 0.6]], [0.5, 0.5]);
        let b = belief_init(&m, 0).unwrap();
        assert!((b.probs()[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((b.probs()[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn init_identity_and_uninformative() {
        let m = two_state([[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]], [0.5, 0.5]);
        assert_eq!(belief_init(&m, 0).unwrap(), Belief::point(2, 0));
        let m = two_state([[1.0, 0.0], [0.0, 1.0]], [[0.5, 0.5], [0.5, 0.5]], [0.3, 0.7]);
        let b = belief_init(&m, 1).unwrap();
        assert!((b.probs()[0] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn update_hand_computation() {
        let m = two_state([[0.9, 0.1], [0.2, 0.8]], [[0.7, 0.3], [0.3, 0.7]], [0.5, 0.5]);
        let b = Belief::new(vec![0.5, 0.5]).unwrap();
        let b2 = belief_update(&m, &b, 0, 0).unwrap();
        assert!((b2.probs()[0] - 0.385 / 0.52).abs() < 1e-12);
        assert!((b2.probs()[1] - 0.135 / 0.52).abs() < 1e-12);
    }

    #[test]
    fn update_transports_and_filters() {
        let m = two_state([[0.0, 1.0], [1.0, 0.0]], [[1.0, 0.0], [0.0, 1.0]], [1.0, 0.0]);
        let b = belief_update(&m, &Belief::point(2, 0), 0, 1).unwrap();
        assert_eq!(b, Belief::point(2, 1));
        assert!(matches!(
            belief_update(&m, &Belief::point(2, 0), 0, 0),
            Err(PomdpError::ImpossibleObservation { obs: 0 })
        ));
        let m = two_state([[1.0, 0.0], [0.0, 1.0]], [[1.0, 0.0], [0.0, 1.0]], [0.5, 0.5]);
        let b = belief_update(&m, &Belief::new(vec![0.5, 0.5]).unwrap(), 0, 0).unwrap();
        assert_eq!(b, Belief::point(2, 0));
        assert!(matches!(
            belief_update(&m, &Belief::point(3, 0), 0, 0),
            Err(PomdpError::Dimension { expected: 2, got: 3 })
        ));
    }
}
