use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{argmax, MarkovPolicy, Trajectory};
use crate::nn::{Mlp2, TrainConfig, Trainer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QConfig {
    pub width: usize,
    /// Epochs between target-network syncs.
    pub target_update_epochs: usize,
}

impl Default for QConfig {
    fn default() -> Self {
        QConfig { width: 16, target_update_epochs: 10 }
    }
}

/// A stationary Q-network `s -> (Q(s, a))_a` trained by fitted Q-iteration
/// against a periodically synced target network.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QLearner {
    pub q_net: Mlp2,
    pub target_net: Mlp2,
    pub target_update_epochs: usize,
    pub train_epochs: usize,
    pub state_scale: f64,
    pub loss_curve: Vec<f64>,
    /// Epochs at which `target_net` was overwritten by `q_net`.
    pub sync_epochs: Vec<usize>,
}

impl QLearner {
    pub fn q_values(&self, state: usize) -> Vec<f64> {
        self.q_net.forward(&[state as f64 / self.state_scale]).expect("1-d input")
    }

    /// Argmax action, lowest index on ties.
    pub fn greedy_action(&self, state: usize) -> usize {
        argmax(&self.q_values(state))
    }

    pub fn greedy_policy(&self, n_states: usize, horizon: usize) -> MarkovPolicy {
        let actions: Vec<usize> = (0..n_states).map(|s| self.greedy_action(s)).collect();
        MarkovPolicy::stationary_deterministic(horizon, &actions, self.q_net.out_dim())
    }
}

struct Transition {
    state: usize,
    action: usize,
    reward: f64,
    next: Option<usize>,
}

fn transitions(dataset: &[Trajectory]) -> Vec<Transition> {
    dataset
        .iter()
        .flat_map(|t| {
            let steps = t.steps();
            steps.iter().enumerate().map(move |(h, st)| Transition {
                state: st.state,
                action: st.action,
                reward: st.reward,
                next: steps.get(h + 1).map(|n| n.state),
            })
        })
        .collect()
}

/// Fitted Q-iteration on the dataset transitions. The regression target of
/// `(s, a, r, s')` is `r + max_a' Q_target(s', a')`, or `r` at the last step.
/// Targets are recomputed only when the target network is synced.
pub fn train_q_learning(
    dataset: &[Trajectory],
    n_states: usize,
    n_actions: usize,
    config: &TrainConfig,
    qcfg: &QConfig,
) -> Result<QLearner> {
    if dataset.is_empty() || dataset.iter().all(Trajectory::is_empty) {
        return Err(Error::EmptyDataset);
    }
    if qcfg.target_update_epochs == 0 {
        return Err(Error::InvalidParameter("target_update_epochs must be >= 1".into()));
    }
    let data = transitions(dataset);
    if let Some(t) = data.iter().find(|t| t.state >= n_states || t.next.is_some_and(|n| n >= n_states)) {
        return Err(Error::StateOutOfRange(t.state.max(t.next.unwrap_or(0))));
    }
    if let Some(t) = data.iter().find(|t| t.action >= n_actions) {
        return Err(Error::DimensionMismatch { expected: n_actions, got: t.action + 1 });
    }
    let state_scale = n_states.saturating_sub(1).max(1) as f64;
    let inputs: Vec<[f64; 1]> = data.iter().map(|t| [t.state as f64 / state_scale]).collect();

    let mut q_net = Mlp2::random(1, qcfg.width, n_actions, config.seed);
    let mut target_net = q_net.clone();
    let mut trainer = Trainer::new(config, &q_net)?;
    let mut targets = vec![0.0; data.len()];
    let mut loss_curve = Vec::with_capacity(config.epochs);
    let mut sync_epochs = Vec::new();

    for epoch in 0..config.epochs {
        if epoch % qcfg.target_update_epochs == 0 {
            target_net = q_net.clone();
            sync_epochs.push(epoch);
            let next_values: Vec<f64> = (0..n_states)
                .map(|s| {
                    let q = target_net.forward(&[s as f64 / state_scale]).expect("1-d input");
                    q[argmax(&q)]
                })
                .collect();
            for (y, t) in targets.iter_mut().zip(&data) {
                *y = t.reward + t.next.map_or(0.0, |n| next_values[n]);
            }
        }
        let loss = trainer.epoch(&mut q_net, &inputs, |i, out, d_out| {
            let e = out[data[i].action] - targets[i];
            d_out[data[i].action] = 2.0 * e;
            e * e
        })?;
        loss_curve.push(loss);
    }

    Ok(QLearner {
        q_net,
        target_net,
        target_update_epochs: qcfg.target_update_epochs,
        train_epochs: config.epochs,
        state_scale,
        loss_curve,
        sync_epochs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{exact_optimal_values, MdpSpec};

    #[test]
    fn single_transition_regresses_to_reward() {
        let d = vec![Trajectory::from_tuples(&[(0, 1, 0.7)])];
        let cfg = TrainConfig { epochs: 2000, batch_size: 1, learning_rate: 1e-2, ..Default::default() };
        let q = train_q_learning(&d, 1, 2, &cfg, &QConfig { width: 4, target_update_epochs: 10 }).unwrap();
        assert!((q.q_values(0)[1] - 0.7).abs() < 1e-3, "{:?}", q.q_values(0));
    }

    #[test]
    fn two_state_chain_recovers_optimal_policy() {
        // s0 --a0 (r=0)--> s1, s0 --a1 (r=0.3)--> s0, s1 --a0 (r=1)--> s1, s1 --a1 (r=0)--> s0.
        let mdp =
            MdpSpec::deterministic(3, 0, vec![vec![1, 0], vec![1, 0]], vec![vec![0.0, 0.3], vec![1.0, 0.0]])
                .unwrap();
        let vt = exact_optimal_values(&mdp);
        let optimal: Vec<usize> = (0..2).map(|s| argmax(&vt.q[0][s])).collect();
        let mut data = Vec::new();
        for a0 in 0..2 {
            for a1 in 0..2 {
                for a2 in 0..2 {
                    let mut s = 0;
                    let mut steps = Vec::new();
                    for a in [a0, a1, a2] {
                        steps.push((s, a, mdp.reward(0, s, a)));
                        s = mdp.successors(s, a)[0].0;
                    }
                    data.push(Trajectory::from_tuples(&steps));
                }
            }
        }
        let cfg = TrainConfig { epochs: 600, batch_size: 8, learning_rate: 1e-2, ..Default::default() };
        let q = train_q_learning(&data, 2, 2, &cfg, &QConfig { width: 8, target_update_epochs: 10 }).unwrap();
        let learned: Vec<usize> = (0..2).map(|s| q.greedy_action(s)).collect();
        assert_eq!(learned, optimal);
    }

    #[test]
    fn target_syncs_every_n_epochs() {
        let d = vec![Trajectory::from_tuples(&[(0, 0, 1.0), (1, 1, 0.0)])];
        let cfg = TrainConfig { epochs: 35, ..Default::default() };
        let q = train_q_learning(&d, 2, 2, &cfg, &QConfig::default()).unwrap();
        assert_eq!(q.sync_epochs, vec![0, 10, 20, 30]);
        assert_eq!(q.loss_curve.len(), 35);
    }

    #[test]
    fn rejects_empty_and_out_of_range() {
        let cfg = TrainConfig::default();
        assert!(matches!(train_q_learning(&[], 2, 2, &cfg, &QConfig::default()), Err(Error::EmptyDataset)));
        let d = vec![Trajectory::from_tuples(&[(3, 0, 1.0)])];
        assert!(train_q_learning(&d, 2, 2, &cfg, &QConfig::default()).is_err());
    }
}
