//! Model-based return-conditioned supervised learning: fit tabular dynamics
//! and behavior models, roll them out, keep the rollouts that beat the best
//! offline return, and train an RCSL policy on what survives.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{
    fit_tabular_behavior, fit_tabular_dynamics, train_mlp_rcsl, RcslMlpPolicy, RtgFeatures, TabularBehavior,
    TabularDynamics,
};
use crate::mdp::{build_rtg_dataset, monte_carlo_return, MdpSpec, Step, Trajectory};
use crate::nn::TrainConfig;
use crate::rng::{episode_rng, StreamRng};
use rand::Rng;

const ATTEMPT_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutConfig {
    pub n_target: usize,
    pub max_attempts: usize,
    pub rng_seed: u64,
    pub horizon: usize,
}

impl RolloutConfig {
    pub fn new(n_target: usize, horizon: usize, rng_seed: u64) -> Self {
        RolloutConfig { n_target, max_attempts: 10_000, rng_seed, horizon }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_target == 0 {
            return Err(Error::InvalidParameter("n_target must be >= 1".into()));
        }
        if self.max_attempts < self.n_target {
            return Err(Error::InvalidParameter(format!(
                "max_attempts {} is below n_target {}",
                self.max_attempts, self.n_target
            )));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutReport {
    pub rollout_dataset: Vec<Trajectory>,
    pub g_max: f64,
    pub attempts_used: usize,
    pub high_return_rate: f64,
    /// Rollouts abandoned at a state-action pair the model never saw.
    pub discarded_unmodeled: usize,
    /// False when the attempt budget ran out before `n_target` rollouts.
    pub complete: bool,
}

impl RolloutReport {
    pub fn max_return(&self) -> f64 {
        self.rollout_dataset.iter().map(Trajectory::total_return).fold(f64::NEG_INFINITY, f64::max)
    }
}

enum Attempt {
    Kept(Trajectory),
    Rejected,
    Unmodeled,
}

fn rollout_once(
    initial: &[usize],
    dynamics: &TabularDynamics,
    behavior: &TabularBehavior,
    horizon: usize,
    rng: &mut StreamRng,
) -> Result<Option<Trajectory>> {
    let mut state = initial[rng.gen_range(0..initial.len())];
    let mut steps = Vec::with_capacity(horizon);
    for h in 0..horizon {
        let action = match behavior.sample(state, rng) {
            Ok(a) => a,
            Err(Error::UnmodeledState(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let sampled = if h + 1 == horizon {
            dynamics.sample_reward(state, action, rng).map(|r| (state, r))
        } else {
            dynamics.sample_step(state, action, rng)
        };
        let (next, reward) = match sampled {
            Ok(x) => x,
            Err(Error::UnmodeledPair(..)) => return Ok(None),
            Err(e) => return Err(e),
        };
        steps.push(Step { state, action, reward });
        state = next;
    }
    Ok(Some(Trajectory::new(steps)))
}

/// Rolls out the learned behavior in the learned dynamics and keeps the
/// trajectories whose predicted return strictly exceeds the offline maximum.
///
/// Attempt `i` draws from stream `(rng_seed, i)`, and kept rollouts are
/// ordered by attempt index, so the report does not depend on threading.
pub fn generate_rollout_dataset(
    offline: &[Trajectory],
    dynamics: &TabularDynamics,
    behavior: &TabularBehavior,
    config: &RolloutConfig,
) -> Result<RolloutReport> {
    config.validate()?;
    let initial: Vec<usize> = offline.iter().filter_map(Trajectory::initial_state).collect();
    if initial.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let g_max = offline.iter().map(Trajectory::total_return).fold(f64::NEG_INFINITY, f64::max);

    let mut kept = Vec::new();
    let mut discarded_unmodeled = 0;
    let mut attempts_used = 0;
    let mut start = 0;
    'outer: while start < config.max_attempts {
        let end = (start + ATTEMPT_CHUNK).min(config.max_attempts);
        let results: Vec<Result<Attempt>> = (start..end)
            .into_par_iter()
            .map(|i| {
                let mut rng = episode_rng(config.rng_seed, i as u64);
                Ok(match rollout_once(&initial, dynamics, behavior, config.horizon, &mut rng)? {
                    None => Attempt::Unmodeled,
                    Some(t) if t.total_return() > g_max => Attempt::Kept(t),
                    Some(_) => Attempt::Rejected,
                })
            })
            .collect();
        for (i, r) in (start..end).zip(results) {
            attempts_used = i + 1;
            match r? {
                Attempt::Kept(t) => {
                    kept.push(t);
                    if kept.len() == config.n_target {
                        break 'outer;
                    }
                }
                Attempt::Unmodeled => discarded_unmodeled += 1,
                Attempt::Rejected => {}
            }
        }
        start = end;
    }
    if kept.is_empty() {
        return Err(Error::NoImprovement { g_max, attempts: attempts_used });
    }
    let complete = kept.len() == config.n_target;
    Ok(RolloutReport {
        high_return_rate: kept.len() as f64 / attempts_used as f64,
        rollout_dataset: kept,
        g_max,
        attempts_used,
        discarded_unmodeled,
        complete,
    })
}

#[derive(Debug, Clone)]
pub struct MbrcslOutcome {
    pub policy: RcslMlpPolicy,
    pub report: RolloutReport,
    pub desired_rtg: f64,
    pub eval_return: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MbrcslConfig {
    pub rollout: RolloutConfig,
    pub train: TrainConfig,
    pub width: usize,
    pub eval_episodes: usize,
    pub rtg_unit: f64,
}

/// Fit models, generate rollouts, train the output policy on the rollout
/// RTG dataset and evaluate it in `mdp` with the best rollout return as the
/// desired RTG.
pub fn run_mbrcsl(offline: &[Trajectory], mdp: &MdpSpec, config: &MbrcslConfig) -> Result<MbrcslOutcome> {
    if config.eval_episodes == 0 {
        return Err(Error::InvalidParameter("eval_episodes must be >= 1".into()));
    }
    let dynamics = fit_tabular_dynamics(offline)?;
    let behavior = fit_tabular_behavior(offline, mdp.n_actions())?;
    let report = generate_rollout_dataset(offline, &dynamics, &behavior, &config.rollout)?;
    let rtg = build_rtg_dataset(&report.rollout_dataset);
    let features = RtgFeatures::new(mdp.n_states(), config.rtg_unit);
    let policy = train_mlp_rcsl(&rtg, mdp.n_actions(), features, config.width, &config.train)?;
    let desired_rtg = report.max_return();
    let eval_return =
        monte_carlo_return(mdp, &policy, desired_rtg, config.rollout.rng_seed, config.eval_episodes)?;
    Ok(MbrcslOutcome { policy, report, desired_rtg, eval_return })
}
