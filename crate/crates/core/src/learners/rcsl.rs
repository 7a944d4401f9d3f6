use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{one_hot, RcHistory, ReturnConditionedPolicy, RtgDataset};
use crate::nn::{train_mse, Mlp2, TrainConfig};

/// Input normalization `(s / state_scale, g / rtg_unit)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RtgFeatures {
    pub state_scale: f64,
    pub rtg_unit: f64,
}

impl RtgFeatures {
    /// States scaled into `[0, 1]`, returns measured in `rtg_unit`.
    pub fn new(n_states: usize, rtg_unit: f64) -> Self {
        RtgFeatures { state_scale: n_states.saturating_sub(1).max(1) as f64, rtg_unit }
    }

    pub fn encode(&self, state: usize, rtg: f64) -> [f64; 2] {
        [state as f64 / self.state_scale, rtg / self.rtg_unit]
    }
}

/// `pi(s, g) = round(net(s, g))`, clamped to the action range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcslMlpPolicy {
    pub net: Mlp2,
    pub features: RtgFeatures,
    pub n_actions: usize,
}

impl RcslMlpPolicy {
    pub fn raw_output(&self, state: usize, rtg: f64) -> f64 {
        let x = self.features.encode(state, rtg);
        let mut cache = crate::nn::ForwardCache::default();
        let mut out = [0.0];
        self.net.forward_into(&x, &mut cache, &mut out);
        out[0]
    }

    /// Nearest action code; halves round up, so with two actions this is
    /// the threshold `1[x >= 0.5]`.
    pub fn project(&self, x: f64) -> usize {
        let max = (self.n_actions - 1) as f64;
        if x.is_nan() {
            return 0;
        }
        (x + 0.5).floor().clamp(0.0, max) as usize
    }

    pub fn act(&self, state: usize, rtg: f64) -> usize {
        self.project(self.raw_output(state, rtg))
    }

    /// Fraction of triples whose projected action differs from the label.
    pub fn classification_error(&self, dataset: &RtgDataset) -> f64 {
        if dataset.is_empty() {
            return 0.0;
        }
        let wrong = dataset.triples.iter().filter(|t| self.act(t.state, t.rtg) != t.action).count();
        wrong as f64 / dataset.len() as f64
    }
}

impl ReturnConditionedPolicy for RcslMlpPolicy {
    fn action_probs(&self, history: &RcHistory) -> Result<Vec<f64>> {
        Ok(one_hot(self.act(history.state(), history.rtg()), self.n_actions))
    }
}

/// Fits `pi(s, g)` to the action codes of `dataset` under squared error.
pub fn train_mlp_rcsl(
    dataset: &RtgDataset,
    n_actions: usize,
    features: RtgFeatures,
    width: usize,
    config: &TrainConfig,
) -> Result<RcslMlpPolicy> {
    let init = Mlp2::random(2, width, 1, config.seed);
    train_mlp_rcsl_from(init, dataset, n_actions, features, config).map(|(p, _)| p)
}

/// As [`train_mlp_rcsl`], starting from `init`; also returns the loss curve.
pub fn train_mlp_rcsl_from(
    init: Mlp2,
    dataset: &RtgDataset,
    n_actions: usize,
    features: RtgFeatures,
    config: &TrainConfig,
) -> Result<(RcslMlpPolicy, Vec<f64>)> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if n_actions == 0 {
        return Err(Error::InvalidParameter("need at least one action".into()));
    }
    let data: Vec<(Vec<f64>, Vec<f64>)> = dataset
        .triples
        .iter()
        .map(|t| (features.encode(t.state, t.rtg).to_vec(), vec![t.action as f64]))
        .collect();
    let (net, curve) = train_mse(&init, &data, config)?;
    Ok((RcslMlpPolicy { net, features, n_actions }, curve))
}
