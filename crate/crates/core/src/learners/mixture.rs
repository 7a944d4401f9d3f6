use crate::error::{Error, Result};
use crate::mdp::{RcHistory, ReturnConditionedPolicy, Trajectory};

const RTG_TOL: f64 = 1e-9;

/// A distinct dataset prefix `s_1, g_1, a_1, ..., s_j, g_j` together with
/// the empirical distribution of the action taken next.
#[derive(Debug, Clone)]
struct StoredPrefix {
    trajectory: usize,
    len: usize,
    last_state: usize,
    next_action_counts: Vec<u64>,
}

/// Return-conditioned policy that memorizes dataset prefixes and
/// generalizes to unseen histories by mixing the stored prefixes that end in
/// the same state, with uniform weights.
#[derive(Debug, Clone)]
pub struct MixtureRcPolicy {
    dataset: Vec<Trajectory>,
    prefixes: Vec<StoredPrefix>,
    n_actions: usize,
}

/// Where a history is routed: `(stored prefix, weight)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub enum Generalization {
    Seen(usize),
    Mixture(Vec<(usize, f64)>),
}

impl MixtureRcPolicy {
    fn prefix_matches(&self, p: &StoredPrefix, history: &RcHistory) -> bool {
        if history.states().len() != p.len {
            return false;
        }
        let t = &self.dataset[p.trajectory];
        let steps = &t.steps()[..p.len];
        steps.iter().zip(history.states()).all(|(st, &s)| st.state == s)
            && steps.iter().zip(history.actions()).all(|(st, &a)| st.action == a)
            && t.rtg()[..p.len].iter().zip(history.rtgs()).all(|(g, h)| (g - h).abs() <= RTG_TOL)
    }

    pub fn n_prefixes(&self) -> usize {
        self.prefixes.len()
    }

    /// The mapping from a history to stored prefixes: a seen history maps to
    /// itself with weight 1, an unseen one to a uniform mixture over stored
    /// prefixes sharing its last state.
    pub fn generalization_map(&self, history: &RcHistory) -> Result<Generalization> {
        if let Some(i) = self.prefixes.iter().position(|p| self.prefix_matches(p, history)) {
            return Ok(Generalization::Seen(i));
        }
        let matching: Vec<usize> = self
            .prefixes
            .iter()
            .enumerate()
            .filter(|(_, p)| p.last_state == history.state())
            .map(|(i, _)| i)
            .collect();
        if matching.is_empty() {
            return Err(Error::NoGeneralizationTarget(history.state()));
        }
        let w = 1.0 / matching.len() as f64;
        Ok(Generalization::Mixture(matching.into_iter().map(|i| (i, w)).collect()))
    }

    fn prefix_policy(&self, i: usize) -> Vec<f64> {
        let counts = &self.prefixes[i].next_action_counts;
        let total: u64 = counts.iter().sum();
        counts.iter().map(|&c| c as f64 / total as f64).collect()
    }
}

pub fn build_mixture_rc_policy(dataset: &[Trajectory], n_actions: usize) -> Result<MixtureRcPolicy> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut policy = MixtureRcPolicy { dataset: dataset.to_vec(), prefixes: Vec::new(), n_actions };
    for (i, t) in dataset.iter().enumerate() {
        for (j, st) in t.steps().iter().enumerate() {
            if st.action >= n_actions {
                return Err(Error::DimensionMismatch { expected: n_actions, got: st.action + 1 });
            }
            let prefix: Vec<(usize, f64, usize)> =
                t.steps()[..j].iter().zip(t.rtg()).map(|(s, &g)| (s.state, g, s.action)).collect();
            let history = RcHistory::from_parts(&prefix, (st.state, t.rtg()[j]));
            match policy.prefixes.iter().position(|p| policy.prefix_matches(p, &history)) {
                Some(k) => policy.prefixes[k].next_action_counts[st.action] += 1,
                None => {
                    let mut counts = vec![0; n_actions];
                    counts[st.action] = 1;
                    policy.prefixes.push(StoredPrefix {
                        trajectory: i,
                        len: j + 1,
                        last_state: st.state,
                        next_action_counts: counts,
                    });
                }
            }
        }
    }
    Ok(policy)
}

/// Next-action distribution for a history.
pub fn mixture_act(policy: &MixtureRcPolicy, history: &RcHistory) -> Result<Vec<f64>> {
    match policy.generalization_map(history)? {
        Generalization::Seen(i) => Ok(policy.prefix_policy(i)),
        Generalization::Mixture(parts) => {
            let mut out = vec![0.0; policy.n_actions];
            for (i, w) in parts {
                for (o, p) in out.iter_mut().zip(policy.prefix_policy(i)) {
                    *o += w * p;
                }
            }
            Ok(out)
        }
    }
}

impl ReturnConditionedPolicy for MixtureRcPolicy {
    fn action_probs(&self, history: &RcHistory) -> Result<Vec<f64>> {
        mixture_act(self, history)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::build_stitch_counterexample;
    use crate::mdp::{exact_expected_return_rc, monte_carlo_return};

    #[test]
    fn unseen_start_mixes_both_first_actions() {
        let c = build_stitch_counterexample();
        let pi = build_mixture_rc_policy(&c.dataset, 2).unwrap();
        let p = mixture_act(&pi, &RcHistory::start(0, 2.0)).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn seen_prefix_is_memorized() {
        let c = build_stitch_counterexample();
        let pi = build_mixture_rc_policy(&c.dataset, 2).unwrap();
        let h = RcHistory::from_parts(&[(0, 1.0, 0)], (1, 1.0));
        assert!(matches!(pi.generalization_map(&h).unwrap(), Generalization::Seen(_)));
        assert_eq!(mixture_act(&pi, &h).unwrap(), vec![0.0, 1.0]);
    }

    #[test]
    fn exact_return_is_one() {
        let c = build_stitch_counterexample();
        let pi = build_mixture_rc_policy(&c.dataset, 2).unwrap();
        let j = exact_expected_return_rc(&c.mdp, &pi, 2.0).unwrap();
        assert!((j - 1.0).abs() < 1e-12);
        // Four equally likely leaves with returns 0, 1, 1, 2.
        let n = 4000;
        let mc = monte_carlo_return(&c.mdp, &pi, 2.0, 17, n).unwrap();
        assert!((mc - j).abs() <= 3.0 * 2.0 * (1.0 / n as f64).sqrt());
    }

    #[test]
    fn unknown_last_state_is_an_error() {
        let c = build_stitch_counterexample();
        let pi = build_mixture_rc_policy(&c.dataset, 2).unwrap();
        assert!(matches!(mixture_act(&pi, &RcHistory::start(2, 0.0)), Err(Error::NoGeneralizationTarget(2))));
    }

    #[test]
    fn mixture_weights_form_a_simplex() {
        let c = build_stitch_counterexample();
        let pi = build_mixture_rc_policy(&c.dataset, 2).unwrap();
        let h = RcHistory::from_parts(&[(0, 2.0, 1)], (1, 1.0));
        match pi.generalization_map(&h).unwrap() {
            Generalization::Mixture(parts) => {
                assert_eq!(parts.len(), 2);
                assert!((parts.iter().map(|p| p.1).sum::<f64>() - 1.0).abs() < 1e-15);
            }
            other => panic!("expected a mixture, got {other:?}"),
        }
    }
}
