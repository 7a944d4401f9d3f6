use crate::error::{Error, Result};
use crate::mdp::{rollout_markov_episode, MarkovPolicy, MdpSpec, Trajectory};

/// An instance of the LinearQ family with size parameter `u`.
///
/// States are `0..=3u+2`, actions `{0, 1}`, horizon `3u+3`, start state 0.
/// Rewards are multiples of `k/2` with `k = 1/(3u+1)`.
#[derive(Debug, Clone)]
pub struct LinearQEnv {
    pub u: usize,
    pub k: f64,
    pub mdp: MdpSpec,
}

impl LinearQEnv {
    pub fn n_states(&self) -> usize {
        3 * self.u + 3
    }

    pub fn absorbing_state(&self) -> usize {
        3 * self.u + 2
    }

    /// Expresses a return in multiples of `k`.
    pub fn in_k_units(&self, x: f64) -> f64 {
        x / self.k
    }
}

fn check_u(u: usize) -> Result<()> {
    if u == 0 {
        Err(Error::InvalidParameter("LinearQ size parameter u must be >= 1".into()))
    } else {
        Ok(())
    }
}

fn next_state(u: usize, s: usize, a: usize) -> usize {
    let even = s.is_multiple_of(2);
    if a == 0 {
        match s {
            _ if s <= u => s + 1,
            _ if s <= 2 * u => {
                if even {
                    3 * u + 2
                } else {
                    3 * u + 1
                }
            }
            _ => 3 * u + 2,
        }
    } else {
        match s {
            _ if s <= u => {
                if even {
                    3 * u + 2
                } else {
                    3 * u + 1
                }
            }
            _ if s <= 3 * u + 1 => s + 1,
            _ => 3 * u + 2,
        }
    }
}

/// Reward in units of `k`.
fn reward_units(u: usize, s: usize, a: usize) -> f64 {
    let (uf, sf) = (u as f64, s as f64);
    let even = s.is_multiple_of(2);
    if a == 0 {
        match s {
            _ if s < u => 2.0,
            _ if s == u => 1.5,
            _ if s <= 2 * u => {
                if even {
                    -2.0 * sf + 4.0 * uf + 2.0
                } else {
                    -2.0 * sf + 4.0 * uf + 1.5
                }
            }
            _ => 0.0,
        }
    } else {
        match s {
            _ if s <= u => {
                if even {
                    -sf + 3.0 * uf + 1.5
                } else {
                    -sf + 3.0 * uf + 1.0
                }
            }
            _ if s <= 3 * u => 1.0,
            _ if s == 3 * u + 1 => 0.5,
            _ => 0.0,
        }
    }
}

pub fn build_linearq(u: usize) -> Result<LinearQEnv> {
    check_u(u)?;
    let n = 3 * u + 3;
    let k = 1.0 / (3 * u + 1) as f64;
    let next = (0..n).map(|s| (0..2).map(|a| next_state(u, s, a)).collect()).collect();
    let reward = (0..n).map(|s| (0..2).map(|a| reward_units(u, s, a) * k).collect()).collect();
    let mdp = MdpSpec::deterministic(n, 0, next, reward)?;
    Ok(LinearQEnv { u, k, mdp })
}

/// Closed-form optimal quantities of a LinearQ instance.
#[derive(Debug, Clone)]
pub struct LinearQReference {
    pub u: usize,
    pub k: f64,
    pub pi_star: MarkovPolicy,
    pub v_star_0: f64,
}

impl LinearQReference {
    /// `Q*(s,0) = 2k ReLU(2u+1-s)`, `Q*(s,1) = k ReLU(3u+1.5-s)`.
    pub fn q_star(&self, s: usize, a: usize) -> Result<f64> {
        if s > 3 * self.u + 2 {
            return Err(Error::StateOutOfRange(s));
        }
        if a > 1 {
            return Err(Error::InvalidParameter(format!("action {a} outside {{0, 1}}")));
        }
        let (uf, sf) = (self.u as f64, s as f64);
        Ok(if a == 0 {
            2.0 * self.k * (2.0 * uf + 1.0 - sf).max(0.0)
        } else {
            self.k * (3.0 * uf + 1.5 - sf).max(0.0)
        })
    }

    pub fn optimal_action(&self, s: usize) -> usize {
        usize::from(s > self.u)
    }
}

pub fn linearq_reference(u: usize) -> Result<LinearQReference> {
    check_u(u)?;
    let k = 1.0 / (3 * u + 1) as f64;
    let n = 3 * u + 3;
    let actions: Vec<usize> = (0..n).map(|s| usize::from(s > u)).collect();
    Ok(LinearQReference {
        u,
        k,
        pi_star: MarkovPolicy::stationary_deterministic(n, &actions, 2),
        v_star_0: 2.0 * k * (2 * u + 1) as f64,
    })
}

/// `3(3u+3)n` optimal trajectories followed by `n` trajectories of each
/// one-step-deviation policy, in ascending order of the deviation state.
pub fn build_linearq_dataset(u: usize, n: usize, rng_seed: u64) -> Result<Vec<Trajectory>> {
    if n == 0 {
        return Err(Error::InvalidParameter("dataset multiplicity n must be >= 1".into()));
    }
    let env = build_linearq(u)?;
    let n_states = env.n_states();
    let horizon = env.mdp.horizon();
    let optimal: Vec<usize> = (0..n_states).map(|s| usize::from(s > u)).collect();

    let mut policies = vec![(MarkovPolicy::stationary_deterministic(horizon, &optimal, 2), 3 * n_states * n)];
    for t in 0..n_states {
        let mut deviated = optimal.clone();
        deviated[t] = 1 - deviated[t];
        policies.push((MarkovPolicy::stationary_deterministic(horizon, &deviated, 2), n));
    }

    let mut out = Vec::with_capacity(4 * n_states * n);
    let mut episode = 0u64;
    for (policy, count) in &policies {
        for _ in 0..*count {
            out.push(rollout_markov_episode(&env.mdp, policy, rng_seed, episode)?);
            episode += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{coverage_checks, exact_optimal_values};

    #[test]
    fn u1_hand_substitution() {
        let env = build_linearq(1).unwrap();
        assert_eq!(env.k, 0.25);
        assert_eq!(env.mdp.reward(0, 0, 0), 0.5);
        let (s, _) = env.mdp.successors(1, 0)[0];
        assert_eq!(s, 2);
    }

    #[test]
    fn absorbing_state_cases() {
        for u in 1..10 {
            let env = build_linearq(u).unwrap();
            let last = 3 * u + 2;
            for a in 0..2 {
                assert_eq!(env.mdp.successors(last, a), vec![(last, 1.0)]);
            }
            assert_eq!(env.mdp.reward(0, last, 1), 0.0);
        }
    }

    #[test]
    fn u2_odd_branch_reward() {
        let env = build_linearq(2).unwrap();
        assert!((env.mdp.reward(0, 3, 0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rewards_lie_in_unit_interval_except_first_deviation() {
        for u in 1..30 {
            let env = build_linearq(u).unwrap();
            for s in 0..env.n_states() {
                for a in 0..2 {
                    let r = env.mdp.reward(0, s, a);
                    if (s, a) == (0, 1) {
                        // Q*(0,1) is collected in a single step.
                        assert!((r - (3.0 * u as f64 + 1.5) * env.k).abs() < 1e-15);
                        assert!(r > 1.0);
                    } else {
                        assert!((0.0..=1.0).contains(&r), "u={u} s={s} a={a} r={r}");
                    }
                }
            }
        }
    }

    #[test]
    fn zero_u_rejected() {
        assert!(build_linearq(0).is_err());
        assert!(linearq_reference(0).is_err());
    }

    #[test]
    fn reference_values() {
        let r = linearq_reference(4).unwrap();
        assert!((r.v_star_0 - 18.0 / 13.0).abs() < 1e-15);
        assert_eq!(r.q_star(14, 0).unwrap(), 0.0);
        assert_eq!(r.q_star(14, 1).unwrap(), 0.0);
        assert_eq!(r.pi_star.deterministic_action(0, 5), Some(1));
        assert_eq!(r.pi_star.deterministic_action(0, 4), Some(0));
        assert!(matches!(r.q_star(15, 0), Err(Error::StateOutOfRange(15))));
    }

    #[test]
    fn dataset_counts_returns_and_coverage() {
        let u = 2;
        let d = build_linearq_dataset(u, 1, 3).unwrap();
        assert_eq!(d.len(), 36);
        let env = build_linearq(u).unwrap();
        let vt = exact_optimal_values(&env.mdp);
        let v0 = vt.v[0][0];
        for t in &d[..27] {
            assert_eq!(t.len(), env.mdp.horizon());
            assert!((t.total_return() - v0).abs() < env.k / 10.0);
        }
        let c = coverage_checks(&d, &env.mdp, None).unwrap();
        assert!(c.uniform);
    }
}
