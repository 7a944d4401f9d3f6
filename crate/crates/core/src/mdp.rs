//! Finite-horizon tabular MDPs, exact dynamic programming, simulation and
//! return-conditioned evaluation.
//!
//! Steps are indexed from 0 internally: step `h` in code is step `h + 1` in
//! the usual 1-based notation, and value tables carry one extra terminal row
//! (`h == horizon`) that is identically zero.

use std::cmp::Ordering;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{episode_rng, sample_index, StreamRng};

const SUM_TOL: f64 = 1e-12;

/// Default cap on the number of history nodes expanded by exact enumeration.
pub const DEFAULT_NODE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Transitions {
    /// `next[s][a]`
    Deterministic(Vec<Vec<usize>>),
    /// `probs[s][a][s']`
    Stochastic(Vec<Vec<Vec<f64>>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Rewards {
    /// `r[s][a]`, identical at every step.
    Stationary(Vec<Vec<f64>>),
    /// `r[h][s][a]`, one table per step.
    PerStep(Vec<Vec<Vec<f64>>>),
}

#[derive(Serialize, Deserialize)]
struct MdpRepr {
    horizon: usize,
    n_states: usize,
    n_actions: usize,
    initial_dist: Vec<f64>,
    deterministic: bool,
    transition: Transitions,
    reward: Rewards,
}

/// A finite-horizon tabular MDP `(H, S, A, mu, T, r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MdpRepr", into = "MdpRepr")]
pub struct MdpSpec {
    horizon: usize,
    n_states: usize,
    n_actions: usize,
    initial_dist: Vec<f64>,
    transitions: Transitions,
    rewards: Rewards,
}

impl TryFrom<MdpRepr> for MdpSpec {
    type Error = Error;

    fn try_from(repr: MdpRepr) -> Result<Self> {
        let is_det = matches!(repr.transition, Transitions::Deterministic(_));
        if repr.deterministic != is_det {
            return Err(Error::InvalidMdp(format!(
                "\"deterministic\": {} does not match the transition table layout",
                repr.deterministic
            )));
        }
        MdpSpec::new(
            repr.horizon,
            repr.n_states,
            repr.n_actions,
            repr.initial_dist,
            repr.transition,
            repr.reward,
        )
    }
}

impl From<MdpSpec> for MdpRepr {
    fn from(m: MdpSpec) -> Self {
        MdpRepr {
            horizon: m.horizon,
            n_states: m.n_states,
            n_actions: m.n_actions,
            initial_dist: m.initial_dist,
            deterministic: matches!(m.transitions, Transitions::Deterministic(_)),
            transition: m.transitions,
            reward: m.rewards,
        }
    }
}

fn check_distribution(what: &str, p: &[f64], len: usize) -> Result<()> {
    if p.len() != len {
        return Err(Error::InvalidMdp(format!("{what} has length {} (expected {len})", p.len())));
    }
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidMdp(format!("{what} has a negative or non-finite entry")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > SUM_TOL {
        return Err(Error::InvalidMdp(format!("{what} sums to {total}")));
    }
    Ok(())
}

fn check_reward_table(table: &[Vec<f64>], n_states: usize, n_actions: usize) -> Result<()> {
    if table.len() != n_states || table.iter().any(|row| row.len() != n_actions) {
        return Err(Error::InvalidMdp("reward table has wrong shape".into()));
    }
    if table.iter().flatten().any(|r| !r.is_finite()) {
        return Err(Error::InvalidMdp("reward table has a non-finite entry".into()));
    }
    Ok(())
}

impl MdpSpec {
    pub fn new(
        horizon: usize,
        n_states: usize,
        n_actions: usize,
        initial_dist: Vec<f64>,
        transitions: Transitions,
        rewards: Rewards,
    ) -> Result<Self> {
        if horizon == 0 || n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidMdp("horizon, |S| and |A| must be positive".into()));
        }
        check_distribution("initial distribution", &initial_dist, n_states)?;
        match &transitions {
            Transitions::Deterministic(next) => {
                if next.len() != n_states || next.iter().any(|row| row.len() != n_actions) {
                    return Err(Error::InvalidMdp("transition table has wrong shape".into()));
                }
                if next.iter().flatten().any(|&s| s >= n_states) {
                    return Err(Error::InvalidMdp("transition to a nonexistent state".into()));
                }
            }
            Transitions::Stochastic(probs) => {
                if probs.len() != n_states || probs.iter().any(|row| row.len() != n_actions) {
                    return Err(Error::InvalidMdp("transition table has wrong shape".into()));
                }
                for (s, row) in probs.iter().enumerate() {
                    for (a, p) in row.iter().enumerate() {
                        check_distribution(&format!("T(.|{s},{a})"), p, n_states)?;
                    }
                }
            }
        }
        match &rewards {
            Rewards::Stationary(table) => check_reward_table(table, n_states, n_actions)?,
            Rewards::PerStep(tables) => {
                if tables.len() != horizon {
                    return Err(Error::InvalidMdp(format!(
                        "{} per-step reward tables for horizon {horizon}",
                        tables.len()
                    )));
                }
                for table in tables {
                    check_reward_table(table, n_states, n_actions)?;
                }
            }
        }
        Ok(Self { horizon, n_states, n_actions, initial_dist, transitions, rewards })
    }

    /// Deterministic MDP with stationary rewards and a fixed initial state.
    pub fn deterministic(
        horizon: usize,
        initial_state: usize,
        next: Vec<Vec<usize>>,
        reward: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n_states = next.len();
        let n_actions = next.first().map_or(0, Vec::len);
        if initial_state >= n_states {
            return Err(Error::StateOutOfRange(initial_state));
        }
        let mut mu = vec![0.0; n_states];
        mu[initial_state] = 1.0;
        Self::new(
            horizon,
            n_states,
            n_actions,
            mu,
            Transitions::Deterministic(next),
            Rewards::Stationary(reward),
        )
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }

    pub fn transitions(&self) -> &Transitions {
        &self.transitions
    }

    pub fn rewards(&self) -> &Rewards {
        &self.rewards
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self.transitions, Transitions::Deterministic(_))
    }

    /// Reward for taking `a` in `s` at (0-based) step `h`.
    pub fn reward(&self, h: usize, s: usize, a: usize) -> f64 {
        match &self.rewards {
            Rewards::Stationary(r) => r[s][a],
            Rewards::PerStep(r) => r[h][s][a],
        }
    }

    /// Next-state support of `(s, a)` with positive probabilities.
    pub fn successors(&self, s: usize, a: usize) -> Vec<(usize, f64)> {
        match &self.transitions {
            Transitions::Deterministic(next) => vec![(next[s][a], 1.0)],
            Transitions::Stochastic(probs) => {
                probs[s][a].iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(s2, &p)| (s2, p)).collect()
            }
        }
    }

    pub fn sample_next(&self, s: usize, a: usize, rng: &mut StreamRng) -> usize {
        match &self.transitions {
            Transitions::Deterministic(next) => next[s][a],
            Transitions::Stochastic(probs) => sample_index(&probs[s][a], rng),
        }
    }

    pub fn sample_initial(&self, rng: &mut StreamRng) -> usize {
        sample_index(&self.initial_dist, rng)
    }

    fn check_state(&self, s: usize) -> Result<()> {
        if s < self.n_states {
            Ok(())
        } else {
            Err(Error::StateOutOfRange(s))
        }
    }
}

/// One `(state, action, reward)` step. Serialized as a 3-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(usize, usize, f64)", into = "(usize, usize, f64)")]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
}

impl From<(usize, usize, f64)> for Step {
    fn from((state, action, reward): (usize, usize, f64)) -> Self {
        Step { state, action, reward }
    }
}

impl From<Step> for (usize, usize, f64) {
    fn from(s: Step) -> Self {
        (s.state, s.action, s.reward)
    }
}

#[derive(Deserialize)]
struct TrajectoryRepr {
    steps: Vec<Step>,
}

/// A full-length episode together with its returns-to-go.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "TrajectoryRepr")]
pub struct Trajectory {
    steps: Vec<Step>,
    #[serde(skip)]
    rtg: Vec<f64>,
}

impl From<TrajectoryRepr> for Trajectory {
    fn from(repr: TrajectoryRepr) -> Self {
        Trajectory::new(repr.steps)
    }
}

impl Trajectory {
    pub fn new(steps: Vec<Step>) -> Self {
        let mut rtg = vec![0.0; steps.len()];
        let mut acc = 0.0;
        for (g, step) in rtg.iter_mut().zip(&steps).rev() {
            acc += step.reward;
            *g = acc;
        }
        Trajectory { steps, rtg }
    }

    pub fn from_tuples(steps: &[(usize, usize, f64)]) -> Self {
        Self::new(steps.iter().copied().map(Step::from).collect())
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn rtg(&self) -> &[f64] {
        &self.rtg
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Total return `g_1` (zero for an empty trajectory).
    pub fn total_return(&self) -> f64 {
        self.rtg.first().copied().unwrap_or(0.0)
    }

    pub fn initial_state(&self) -> Option<usize> {
        self.steps.first().map(|s| s.state)
    }

    pub fn visits(&self, state: usize) -> bool {
        self.steps.iter().any(|s| s.state == state)
    }

    pub fn check_horizon(&self, horizon: usize) -> Result<()> {
        if self.steps.len() == horizon {
            Ok(())
        } else {
            Err(Error::TrajectoryLength { expected: horizon, got: self.steps.len() })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RtgTriple {
    pub state: usize,
    pub rtg: f64,
    pub action: usize,
}

impl RtgTriple {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.state.cmp(&other.state).then(self.rtg.total_cmp(&other.rtg)).then(self.action.cmp(&other.action))
    }
}

/// The multiset of `(s_h, g_h, a_h)` triples of a trajectory dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RtgDataset {
    pub triples: Vec<RtgTriple>,
    pub source_count: usize,
}

impl RtgDataset {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Triples in canonical `(state, rtg, action)` order.
    pub fn sorted_triples(&self) -> Vec<RtgTriple> {
        let mut t = self.triples.clone();
        t.sort_by(RtgTriple::key_cmp);
        t
    }

    /// Multiset equality with exact comparison of RTG values.
    pub fn multiset_eq(&self, other: &RtgDataset) -> bool {
        let a = self.sorted_triples();
        let b = other.sorted_triples();
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.key_cmp(y) == Ordering::Equal)
    }

    /// Multiset equality with RTG values matched within `tol`. Needed when
    /// the same rewards are summed in different orders.
    pub fn multiset_eq_within(&self, other: &RtgDataset, tol: f64) -> bool {
        let order = |t: &RtgDataset| {
            let mut v = t.triples.clone();
            v.sort_by(|x, y| {
                x.state.cmp(&y.state).then(x.action.cmp(&y.action)).then(x.rtg.total_cmp(&y.rtg))
            });
            v
        };
        let (a, b) = (order(self), order(other));
        a.len() == b.len()
            && a.iter()
                .zip(&b)
                .all(|(x, y)| x.state == y.state && x.action == y.action && (x.rtg - y.rtg).abs() <= tol)
    }
}

pub fn build_rtg_dataset(trajectories: &[Trajectory]) -> RtgDataset {
    let triples = trajectories
        .iter()
        .flat_map(|t| {
            t.steps().iter().zip(t.rtg()).map(|(step, &rtg)| RtgTriple {
                state: step.state,
                rtg,
                action: step.action,
            })
        })
        .collect();
    RtgDataset { triples, source_count: trajectories.len() }
}

/// Optimal `Q[h][s][a]` and `V[h][s]` for `h` in `0..=horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTables {
    pub q: Vec<Vec<Vec<f64>>>,
    pub v: Vec<Vec<f64>>,
}

impl ValueTables {
    /// `sum_s mu(s) V[0][s]`.
    pub fn optimal_return(&self, mdp: &MdpSpec) -> f64 {
        mdp.initial_dist().iter().zip(&self.v[0]).map(|(p, v)| p * v).sum()
    }

    /// Greedy time-dependent policy with lowest-index tie-breaking.
    pub fn greedy_policy(&self) -> MarkovPolicy {
        let horizon = self.q.len() - 1;
        let action_dist = self.q[..horizon]
            .iter()
            .map(|qh| qh.iter().map(|qs| one_hot(argmax(qs), qs.len())).collect())
            .collect();
        MarkovPolicy { action_dist }
    }
}

/// Index of the maximum; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn one_hot(i: usize, n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n];
    p[i] = 1.0;
    p
}

/// Finite-horizon backward induction `Q_h = B Q_{h+1}`.
pub fn exact_optimal_values(mdp: &MdpSpec) -> ValueTables {
    let (hz, ns, na) = (mdp.horizon(), mdp.n_states(), mdp.n_actions());
    let mut q = vec![vec![vec![0.0; na]; ns]; hz + 1];
    let mut v = vec![vec![0.0; ns]; hz + 1];
    for h in (0..hz).rev() {
        for s in 0..ns {
            for (a, qa) in q[h][s].iter_mut().enumerate() {
                let future: f64 = mdp.successors(s, a).into_iter().map(|(s2, p)| p * v[h + 1][s2]).sum();
                *qa = mdp.reward(h, s, a) + future;
            }
            v[h][s] = q[h][s][argmax(&q[h][s])];
        }
    }
    ValueTables { q, v }
}

/// Time-dependent Markov policy `pi[h][s] -> Delta(A)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovPolicy {
    action_dist: Vec<Vec<Vec<f64>>>,
}

impl MarkovPolicy {
    pub fn new(action_dist: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        for (h, rows) in action_dist.iter().enumerate() {
            for (s, p) in rows.iter().enumerate() {
                let total: f64 = p.iter().sum();
                if p.iter().any(|x| *x < 0.0 || !x.is_finite()) || (total - 1.0).abs() > SUM_TOL {
                    return Err(Error::InvalidParameter(format!("pi[{h}][{s}] is not a probability vector")));
                }
            }
        }
        Ok(Self { action_dist })
    }

    /// The same deterministic action map at every step.
    pub fn stationary_deterministic(horizon: usize, actions: &[usize], n_actions: usize) -> Self {
        let row: Vec<Vec<f64>> = actions.iter().map(|&a| one_hot(a, n_actions)).collect();
        Self { action_dist: vec![row; horizon] }
    }

    pub fn stationary(horizon: usize, dist: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(vec![dist; horizon])
    }

    pub fn horizon(&self) -> usize {
        self.action_dist.len()
    }

    pub fn probs(&self, h: usize, s: usize) -> &[f64] {
        &self.action_dist[h][s]
    }

    pub fn deterministic_action(&self, h: usize, s: usize) -> Option<usize> {
        crate::rng::point_mass(&self.action_dist[h][s])
    }

    fn check_dims(&self, mdp: &MdpSpec) -> Result<()> {
        if self.action_dist.len() != mdp.horizon() {
            return Err(Error::DimensionMismatch { expected: mdp.horizon(), got: self.action_dist.len() });
        }
        for rows in &self.action_dist {
            if rows.len() != mdp.n_states() {
                return Err(Error::DimensionMismatch { expected: mdp.n_states(), got: rows.len() });
            }
            if let Some(bad) = rows.iter().find(|p| p.len() != mdp.n_actions()) {
                return Err(Error::DimensionMismatch { expected: mdp.n_actions(), got: bad.len() });
            }
        }
        Ok(())
    }
}

/// Exact expected return of a Markov policy by backward evaluation.
pub fn markov_policy_return(mdp: &MdpSpec, policy: &MarkovPolicy) -> Result<f64> {
    policy.check_dims(mdp)?;
    let mut v = vec![0.0; mdp.n_states()];
    for h in (0..mdp.horizon()).rev() {
        let next = v.clone();
        for (s, vs) in v.iter_mut().enumerate() {
            *vs = policy
                .probs(h, s)
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(a, &p)| {
                    let future: f64 = mdp.successors(s, a).into_iter().map(|(s2, q)| q * next[s2]).sum();
                    p * (mdp.reward(h, s, a) + future)
                })
                .sum();
        }
    }
    Ok(mdp.initial_dist().iter().zip(&v).map(|(p, x)| p * x).sum())
}

pub fn rollout_markov(mdp: &MdpSpec, policy: &MarkovPolicy, rng_seed: u64) -> Result<Trajectory> {
    rollout_markov_episode(mdp, policy, rng_seed, 0)
}

pub fn rollout_markov_episode(
    mdp: &MdpSpec,
    policy: &MarkovPolicy,
    rng_seed: u64,
    episode: u64,
) -> Result<Trajectory> {
    policy.check_dims(mdp)?;
    let mut rng = episode_rng(rng_seed, episode);
    let mut s = mdp.sample_initial(&mut rng);
    let mut steps = Vec::with_capacity(mdp.horizon());
    for h in 0..mdp.horizon() {
        let a = sample_index(policy.probs(h, s), &mut rng);
        let r = mdp.reward(h, s, a);
        steps.push(Step { state: s, action: a, reward: r });
        s = mdp.sample_next(s, a, &mut rng);
    }
    Ok(Trajectory::new(steps))
}

/// The interaction history seen by a return-conditioned policy:
/// `s_1, g_1, a_1, ..., s_h, g_h`.
#[derive(Debug, Clone, PartialEq)]
pub struct RcHistory {
    states: Vec<usize>,
    rtgs: Vec<f64>,
    actions: Vec<usize>,
}

impl RcHistory {
    pub fn start(state: usize, rtg: f64) -> Self {
        RcHistory { states: vec![state], rtgs: vec![rtg], actions: Vec::new() }
    }

    /// Builds a history from `(s, g, a)` entries followed by a final `(s, g)`.
    pub fn from_parts(prefix: &[(usize, f64, usize)], last: (usize, f64)) -> Self {
        let mut h = RcHistory { states: Vec::new(), rtgs: Vec::new(), actions: Vec::new() };
        for &(s, g, a) in prefix {
            h.states.push(s);
            h.rtgs.push(g);
            h.actions.push(a);
        }
        h.states.push(last.0);
        h.rtgs.push(last.1);
        h
    }

    pub fn push(&mut self, action: usize, next_state: usize, next_rtg: f64) {
        self.actions.push(action);
        self.states.push(next_state);
        self.rtgs.push(next_rtg);
    }

    fn pop(&mut self) {
        self.actions.pop();
        self.states.pop();
        self.rtgs.pop();
    }

    pub fn state(&self) -> usize {
        *self.states.last().expect("history is never empty")
    }

    pub fn rtg(&self) -> f64 {
        *self.rtgs.last().expect("history is never empty")
    }

    /// 0-based index of the current step.
    pub fn step(&self) -> usize {
        self.actions.len()
    }

    pub fn states(&self) -> &[usize] {
        &self.states
    }

    pub fn rtgs(&self) -> &[f64] {
        &self.rtgs
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }
}

/// A policy `pi(a | history)` driven by a desired return-to-go.
///
/// Markovian return-conditioned policies only read `history.state()` and
/// `history.rtg()`.
pub trait ReturnConditionedPolicy {
    fn action_probs(&self, history: &RcHistory) -> Result<Vec<f64>>;
}

impl<P: ReturnConditionedPolicy + ?Sized> ReturnConditionedPolicy for &P {
    fn action_probs(&self, history: &RcHistory) -> Result<Vec<f64>> {
        (**self).action_probs(history)
    }
}

/// A Markov policy used as a return-conditioned one: the RTG is ignored.
impl ReturnConditionedPolicy for MarkovPolicy {
    fn action_probs(&self, history: &RcHistory) -> Result<Vec<f64>> {
        let h = history.step().min(self.horizon().saturating_sub(1));
        Ok(self.probs(h, history.state()).to_vec())
    }
}

/// Markovian return-conditioned policy from a closure `(s, g) -> Delta(A)`.
pub struct FnPolicy<F>(pub F);

impl<F: Fn(usize, f64) -> Vec<f64>> ReturnConditionedPolicy for FnPolicy<F> {
    fn action_probs(&self, history: &RcHistory) -> Result<Vec<f64>> {
        Ok((self.0)(history.state(), history.rtg()))
    }
}

fn checked_probs<P: ReturnConditionedPolicy + ?Sized>(
    policy: &P,
    history: &RcHistory,
    n_actions: usize,
) -> Result<Vec<f64>> {
    let p = policy.action_probs(history)?;
    if p.len() != n_actions {
        return Err(Error::DimensionMismatch { expected: n_actions, got: p.len() });
    }
    Ok(p)
}

/// Runs one episode of the return-conditioned evaluation loop and returns
/// the realized trajectory.
pub fn rollout_return_conditioned<P: ReturnConditionedPolicy + ?Sized>(
    mdp: &MdpSpec,
    policy: &P,
    desired_rtg: f64,
    rng_seed: u64,
    episode: u64,
) -> Result<Trajectory> {
    let mut rng = episode_rng(rng_seed, episode);
    let s0 = mdp.sample_initial(&mut rng);
    let mut history = RcHistory::start(s0, desired_rtg);
    let mut steps = Vec::with_capacity(mdp.horizon());
    for h in 0..mdp.horizon() {
        let s = history.state();
        let probs = checked_probs(policy, &history, mdp.n_actions())?;
        let a = sample_index(&probs, &mut rng);
        let r = mdp.reward(h, s, a);
        steps.push(Step { state: s, action: a, reward: r });
        let s2 = mdp.sample_next(s, a, &mut rng);
        history.push(a, s2, history.rtg() - r);
    }
    Ok(Trajectory::new(steps))
}

/// Realized return of one return-conditioned episode.
pub fn evaluate_return_conditioned<P: ReturnConditionedPolicy + ?Sized>(
    mdp: &MdpSpec,
    policy: &P,
    desired_rtg: f64,
    rng_seed: u64,
) -> Result<f64> {
    Ok(rollout_return_conditioned(mdp, policy, desired_rtg, rng_seed, 0)?.total_return())
}

/// Monte Carlo estimate of `J(pi, g)` over `episodes` independent streams.
pub fn monte_carlo_return<P: ReturnConditionedPolicy + ?Sized>(
    mdp: &MdpSpec,
    policy: &P,
    desired_rtg: f64,
    rng_seed: u64,
    episodes: usize,
) -> Result<f64> {
    let mut total = 0.0;
    for e in 0..episodes {
        total += rollout_return_conditioned(mdp, policy, desired_rtg, rng_seed, e as u64)?.total_return();
    }
    Ok(total / episodes.max(1) as f64)
}

pub fn exact_expected_return_rc<P: ReturnConditionedPolicy + ?Sized>(
    mdp: &MdpSpec,
    policy: &P,
    desired_rtg: f64,
) -> Result<f64> {
    exact_expected_return_rc_capped(mdp, policy, desired_rtg, DEFAULT_NODE_CAP)
}

/// Exact `J(pi, g)` by expanding every reachable history with its
/// probability. Fails once more than `node_cap` nodes have been expanded.
pub fn exact_expected_return_rc_capped<P: ReturnConditionedPolicy + ?Sized>(
    mdp: &MdpSpec,
    policy: &P,
    desired_rtg: f64,
    node_cap: usize,
) -> Result<f64> {
    struct Walk<'a, P: ?Sized> {
        mdp: &'a MdpSpec,
        policy: &'a P,
        expanded: usize,
        cap: usize,
    }

    impl<P: ReturnConditionedPolicy + ?Sized> Walk<'_, P> {
        // Expected remaining return from the current history.
        fn expand(&mut self, history: &mut RcHistory) -> Result<f64> {
            let h = history.step();
            if h == self.mdp.horizon() {
                return Ok(0.0);
            }
            self.expanded += 1;
            if self.expanded > self.cap {
                return Err(Error::EnumerationInfeasible { cap: self.cap });
            }
            let s = history.state();
            let g = history.rtg();
            let probs = checked_probs(self.policy, history, self.mdp.n_actions())?;
            let mut value = 0.0;
            for (a, &pa) in probs.iter().enumerate() {
                if pa <= 0.0 {
                    continue;
                }
                let r = self.mdp.reward(h, s, a);
                for (s2, ps) in self.mdp.successors(s, a) {
                    history.push(a, s2, g - r);
                    let rest = self.expand(history)?;
                    history.pop();
                    value += pa * ps * (r + rest);
                }
            }
            Ok(value)
        }
    }

    let mut walk = Walk { mdp, policy, expanded: 0, cap: node_cap };
    let mut total = 0.0;
    for (s0, &p0) in mdp.initial_dist().iter().enumerate() {
        if p0 > 0.0 {
            let mut history = RcHistory::start(s0, desired_rtg);
            total += p0 * walk.expand(&mut history)?;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Coverage {
    pub uniform: bool,
    pub covers_optimal: bool,
}

/// Uniform coverage of `S x A` and coverage of a deterministic `pi*`.
///
/// Only states at which some decision can be taken within the horizon are
/// required; a state first reachable after the last step imposes nothing.
/// For a time-dependent `pi*`, every `(s, pi*_h(s))` with `s` reachable at
/// step `h` must appear.
pub fn coverage_checks(
    dataset: &[Trajectory],
    mdp: &MdpSpec,
    optimal_policy: Option<&MarkovPolicy>,
) -> Result<Coverage> {
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut seen = vec![vec![false; na]; ns];
    for step in dataset.iter().flat_map(|t| t.steps()) {
        mdp.check_state(step.state)?;
        if step.action >= na {
            return Err(Error::DimensionMismatch { expected: na, got: step.action + 1 });
        }
        seen[step.state][step.action] = true;
    }
    let reachable = reachable_by_step(mdp);
    let decision_states: Vec<bool> = (0..ns).map(|s| reachable.iter().any(|step| step[s])).collect();
    let uniform = seen.iter().zip(&decision_states).all(|(row, &needed)| !needed || row.iter().all(|&x| x));
    let covers_optimal = match optimal_policy {
        None => false,
        Some(pi) => {
            pi.check_dims(mdp)?;
            let mut all = !dataset.is_empty();
            for (h, step) in reachable.iter().enumerate() {
                for (s, row) in seen.iter().enumerate() {
                    let a = pi.deterministic_action(h, s).ok_or(Error::StochasticPolicy)?;
                    all &= !step[s] || row[a];
                }
            }
            all
        }
    };
    Ok(Coverage { uniform, covers_optimal })
}

/// `reachable[h][s]`: whether `s` can be occupied at step `h` under some policy.
pub fn reachable_by_step(mdp: &MdpSpec) -> Vec<Vec<bool>> {
    let ns = mdp.n_states();
    let mut out = Vec::with_capacity(mdp.horizon());
    let mut current: Vec<bool> = mdp.initial_dist().iter().map(|&p| p > 0.0).collect();
    for _ in 0..mdp.horizon() {
        let mut next = vec![false; ns];
        for s in (0..ns).filter(|&s| current[s]) {
            for a in 0..mdp.n_actions() {
                for (s2, _) in mdp.successors(s, a) {
                    next[s2] = true;
                }
            }
        }
        out.push(std::mem::replace(&mut current, next));
    }
    out
}

/// Writes one `{"steps":[[s,a,r],...]}` object per line.
pub fn write_jsonl<W: Write>(mut out: W, trajectories: &[Trajectory]) -> Result<()> {
    for t in trajectories {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<Trajectory>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}
