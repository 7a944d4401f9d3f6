use crate::mdp::{MdpSpec, Trajectory};

/// Three-state chain with `r(s_i, a_j) = j - 1` and horizon 2, plus the
/// two-trajectory dataset that covers every state-action pair of `s_1` and
/// `s_2` without containing the optimal trajectory.
///
/// States `s_1..s_3` are indices `0..3`; actions `a_1, a_2` are `0, 1`.
#[derive(Debug, Clone)]
pub struct StitchCounterexample {
    pub mdp: MdpSpec,
    pub dataset: Vec<Trajectory>,
}

pub fn build_stitch_counterexample() -> StitchCounterexample {
    let next = vec![vec![1, 1], vec![2, 2], vec![2, 2]];
    let reward = vec![vec![0.0, 1.0]; 3];
    let mdp = MdpSpec::deterministic(2, 0, next, reward).expect("fixed construction is valid");
    let dataset = vec![
        Trajectory::from_tuples(&[(0, 0, 0.0), (1, 1, 1.0)]),
        Trajectory::from_tuples(&[(0, 1, 1.0), (1, 0, 0.0)]),
    ];
    StitchCounterexample { mdp, dataset }
}
