use std::collections::BTreeMap;

use serde::ser::{SerializeMap, Serializer};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mdp::Trajectory;
use crate::rng::{sample_index, StreamRng};

/// One observed `(s', r)` outcome of a state-action pair. `next_state` is
/// `None` for final-step observations, whose successor is not recorded.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub next_state: Option<usize>,
    pub reward: f64,
    pub count: u64,
}

/// Count-based maximum-likelihood model `T(s', r | s, a)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TabularDynamics {
    table: BTreeMap<(usize, usize), Vec<Outcome>>,
}

impl TabularDynamics {
    pub fn is_modeled(&self, state: usize, action: usize) -> bool {
        self.table.contains_key(&(state, action))
    }

    pub fn outcomes(&self, state: usize, action: usize) -> Result<&[Outcome]> {
        self.table.get(&(state, action)).map(Vec::as_slice).ok_or(Error::UnmodeledPair(state, action))
    }

    /// `(s', r, probability)` over transitions with a recorded successor.
    pub fn next_distribution(&self, state: usize, action: usize) -> Result<Vec<(usize, f64, f64)>> {
        let outcomes = self.outcomes(state, action)?;
        let total: u64 = outcomes.iter().filter(|o| o.next_state.is_some()).map(|o| o.count).sum();
        if total == 0 {
            return Err(Error::UnmodeledPair(state, action));
        }
        Ok(outcomes
            .iter()
            .filter_map(|o| o.next_state.map(|n| (n, o.reward, o.count as f64 / total as f64)))
            .collect())
    }

    /// `(r, probability)` over every observation of `(s, a)`.
    pub fn reward_distribution(&self, state: usize, action: usize) -> Result<Vec<(f64, f64)>> {
        let outcomes = self.outcomes(state, action)?;
        let total: u64 = outcomes.iter().map(|o| o.count).sum();
        let mut merged: Vec<(f64, u64)> = Vec::new();
        for o in outcomes {
            match merged.iter_mut().find(|(r, _)| *r == o.reward) {
                Some((_, c)) => *c += o.count,
                None => merged.push((o.reward, o.count)),
            }
        }
        Ok(merged.into_iter().map(|(r, c)| (r, c as f64 / total as f64)).collect())
    }

    /// Samples `(s', r)` from transitions with a recorded successor.
    pub fn sample_step(&self, state: usize, action: usize, rng: &mut StreamRng) -> Result<(usize, f64)> {
        let dist = self.next_distribution(state, action)?;
        let probs: Vec<f64> = dist.iter().map(|d| d.2).collect();
        let (n, r, _) = dist[sample_index(&probs, rng)];
        Ok((n, r))
    }

    /// Samples a reward alone, for the final step of a rollout.
    pub fn sample_reward(&self, state: usize, action: usize, rng: &mut StreamRng) -> Result<f64> {
        let dist = self.reward_distribution(state, action)?;
        let probs: Vec<f64> = dist.iter().map(|d| d.1).collect();
        Ok(dist[sample_index(&probs, rng)].0)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.table.keys().copied()
    }
}

impl Serialize for TabularDynamics {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.table.len()))?;
        for ((s, a), outcomes) in &self.table {
            map.serialize_entry(&format!("{s},{a}"), outcomes)?;
        }
        map.end()
    }
}

pub fn fit_tabular_dynamics(dataset: &[Trajectory]) -> Result<TabularDynamics> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut table: BTreeMap<(usize, usize), Vec<Outcome>> = BTreeMap::new();
    for t in dataset {
        let steps = t.steps();
        for (h, st) in steps.iter().enumerate() {
            let next_state = steps.get(h + 1).map(|n| n.state);
            let entry = table.entry((st.state, st.action)).or_default();
            match entry
                .iter_mut()
                .find(|o| o.next_state == next_state && o.reward.to_bits() == st.reward.to_bits())
            {
                Some(o) => o.count += 1,
                None => entry.push(Outcome { next_state, reward: st.reward, count: 1 }),
            }
        }
    }
    Ok(TabularDynamics { table })
}

/// Count-based maximum-likelihood behavior policy `mu(a | s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularBehavior {
    n_actions: usize,
    counts: BTreeMap<usize, Vec<u64>>,
}

impl TabularBehavior {
    pub fn probs(&self, state: usize) -> Result<Vec<f64>> {
        let counts = self.counts.get(&state).ok_or(Error::UnmodeledState(state))?;
        let total: u64 = counts.iter().sum();
        Ok(counts.iter().map(|&c| c as f64 / total as f64).collect())
    }

    pub fn counts(&self, state: usize) -> Option<&[u64]> {
        self.counts.get(&state).map(Vec::as_slice)
    }

    pub fn sample(&self, state: usize, rng: &mut StreamRng) -> Result<usize> {
        Ok(sample_index(&self.probs(state)?, rng))
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
}

impl Serialize for TabularBehavior {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.counts.len()))?;
        for (s, counts) in &self.counts {
            map.serialize_entry(&s.to_string(), counts)?;
        }
        map.end()
    }
}

pub fn fit_tabular_behavior(dataset: &[Trajectory], n_actions: usize) -> Result<TabularBehavior> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut counts: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
    for st in dataset.iter().flat_map(|t| t.steps()) {
        if st.action >= n_actions {
            return Err(Error::DimensionMismatch { expected: n_actions, got: st.action + 1 });
        }
        counts.entry(st.state).or_insert_with(|| vec![0; n_actions])[st.action] += 1;
    }
    Ok(TabularBehavior { n_actions, counts })
}
