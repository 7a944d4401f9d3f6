use crate::error::{Error, Result};
use crate::mdp::{MdpSpec, Rewards, Step, Trajectory, Transitions};

pub const ACTION_LEFT: usize = 0;
pub const ACTION_RIGHT: usize = 1;

/// Two single-state MDPs whose offline datasets produce identical
/// `(s, g, a)` multisets.
///
/// In `m1` the good action alternates (`a_R` on odd steps, `a_L` on even
/// steps, counting from 1); in `m2` it is always `a_L`.
#[derive(Debug, Clone)]
pub struct RewardAmbiguityPair {
    pub h0: usize,
    pub k0: usize,
    pub r_good: f64,
    pub r_bad: f64,
    pub m1: MdpSpec,
    pub m2: MdpSpec,
    pub d1: Vec<Trajectory>,
    pub d2: Vec<Trajectory>,
}

impl RewardAmbiguityPair {
    pub fn horizon(&self) -> usize {
        2 * self.h0
    }

    /// `H * r_good`, the optimal return in both MDPs.
    pub fn optimal_return(&self) -> f64 {
        self.horizon() as f64 * self.r_good
    }
}

fn scripted(mdp: &MdpSpec, actions: impl Iterator<Item = usize>) -> Trajectory {
    let steps =
        actions.enumerate().map(|(h, a)| Step { state: 0, action: a, reward: mdp.reward(h, 0, a) }).collect();
    Trajectory::new(steps)
}

pub fn build_reward_ambiguity_pair(
    h0: usize,
    k0: usize,
    r_good: f64,
    r_bad: f64,
) -> Result<RewardAmbiguityPair> {
    if h0 == 0 || k0 == 0 {
        return Err(Error::InvalidParameter("h0 and k0 must be >= 1".into()));
    }
    if !(r_good > r_bad) || !r_good.is_finite() || !r_bad.is_finite() {
        return Err(Error::InvalidParameter(format!("need finite r_good > r_bad, got {r_good} <= {r_bad}")));
    }
    let horizon = 2 * h0;
    // Step h is 0-based here: even h is an odd step in 1-based counting.
    let m1_rewards = (0..horizon)
        .map(|h| if h % 2 == 0 { vec![vec![r_bad, r_good]] } else { vec![vec![r_good, r_bad]] })
        .collect();
    let single = || Transitions::Deterministic(vec![vec![0, 0]]);
    let m1 = MdpSpec::new(horizon, 1, 2, vec![1.0], single(), Rewards::PerStep(m1_rewards))?;
    let m2 =
        MdpSpec::new(horizon, 1, 2, vec![1.0], single(), Rewards::Stationary(vec![vec![r_good, r_bad]]))?;

    let mut d1 = Vec::with_capacity(2 * k0);
    let mut d2 = Vec::with_capacity(2 * k0);
    for first in [ACTION_LEFT, ACTION_RIGHT] {
        for _ in 0..k0 {
            d1.push(scripted(&m1, std::iter::repeat_n(first, horizon)));
            d2.push(scripted(&m2, (0..horizon).map(|h| (first + h) % 2)));
        }
    }
    Ok(RewardAmbiguityPair { h0, k0, r_good, r_bad, m1, m2, d1, d2 })
}
