//! Batch drivers behind the command-line tool. Each returns an
//! [`ExperimentReport`] whose rows are sorted deterministically, whatever
//! order the parallel jobs finish in.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::analysis::linearq_certificate;
use crate::environments::{
    build_grid_maze, build_linearq, build_linearq_dataset, build_reward_ambiguity_pair,
    build_stitch_counterexample, generate_maze_dataset, linearq_reference,
};
use crate::error::{Error, Result};
use crate::learners::{
    build_mixture_rc_policy, mixture_act, train_mlp_rcsl, train_q_learning, QConfig, RtgFeatures,
};
use crate::mbrcsl::{run_mbrcsl, MbrcslConfig, RolloutConfig};
use crate::mdp::{
    build_rtg_dataset, evaluate_return_conditioned, exact_expected_return_rc, exact_optimal_values,
    markov_policy_return, monte_carlo_return, MarkovPolicy, RcHistory, ReturnConditionedPolicy,
};
use crate::nn::TrainConfig;
use crate::report::{ExperimentReport, ReportRow};

/// A hidden width, either fixed or proportional to the LinearQ size `u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WidthSpec {
    Fixed(usize),
    /// `num * u / den`, at least 1.
    PerU {
        num: usize,
        den: usize,
    },
}

impl WidthSpec {
    pub fn resolve(self, u: usize) -> usize {
        match self {
            WidthSpec::Fixed(w) => w,
            WidthSpec::PerU { num, den } => (num * u / den).max(1),
        }
    }
}

impl FromStr for WidthSpec {
    type Err = Error;

    /// Accepts `16`, `u`, `2u`, `u/2`, `3u/4`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("cannot parse width `{s}`"));
        let s = s.trim();
        let Some(pos) = s.find('u') else {
            let w: usize = s.parse().map_err(|_| bad())?;
            return if w == 0 { Err(bad()) } else { Ok(WidthSpec::Fixed(w)) };
        };
        let num = match &s[..pos] {
            "" => 1,
            n => n.parse().map_err(|_| bad())?,
        };
        let den = match &s[pos + 1..] {
            "" => 1,
            rest => rest.strip_prefix('/').ok_or_else(bad)?.parse().map_err(|_| bad())?,
        };
        if num == 0 || den == 0 {
            return Err(bad());
        }
        Ok(WidthSpec::PerU { num, den })
    }
}

impl fmt::Display for WidthSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            WidthSpec::Fixed(w) => write!(f, "{w}"),
            WidthSpec::PerU { num, den } => {
                if num != 1 {
                    write!(f, "{num}")?;
                }
                write!(f, "u")?;
                if den != 1 {
                    write!(f, "/{den}")?;
                }
                Ok(())
            }
        }
    }
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn with_train_params(report: ExperimentReport, train: &TrainConfig) -> ExperimentReport {
    report
        .param("epochs", train.epochs)
        .param("learning_rate", train.learning_rate)
        .param("batch_size", train.batch_size)
        .param("optimizer", format!("{:?}", train.optimizer).to_lowercase())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearQSimConfig {
    pub u_list: Vec<usize>,
    pub rcsl_widths: Vec<WidthSpec>,
    pub ql_widths: Vec<WidthSpec>,
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
    pub dataset_n: usize,
    pub target_update_epochs: usize,
}

impl Default for LinearQSimConfig {
    fn default() -> Self {
        LinearQSimConfig {
            u_list: vec![16],
            rcsl_widths: vec![WidthSpec::Fixed(16)],
            ql_widths: ["16", "u/2", "u", "2u", "4u"].iter().map(|w| w.parse().unwrap()).collect(),
            seeds: vec![0, 1, 2, 3],
            train: TrainConfig::default(),
            dataset_n: 1,
            target_update_epochs: QConfig::default().target_update_epochs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum LinearQMethod {
    Rcsl,
    QLearning,
    Naive,
}

impl LinearQMethod {
    fn name(self) -> &'static str {
        match self {
            LinearQMethod::Rcsl => "rcsl",
            LinearQMethod::QLearning => "ql",
            LinearQMethod::Naive => "naive",
        }
    }
}

fn linearq_job(
    cfg: &LinearQSimConfig,
    u: usize,
    method: LinearQMethod,
    width: usize,
    seed: u64,
) -> Result<ReportRow> {
    let env = build_linearq(u)?;
    let reference = linearq_reference(u)?;
    let optimal = reference.v_star_0;
    let train = cfg.train.with_seed(seed);
    let mut row = ReportRow::new(method.name(), format!("u={u}"));
    row.u = Some(u);
    row.seed = Some(seed);
    let achieved = match method {
        LinearQMethod::Rcsl => {
            let data = build_linearq_dataset(u, cfg.dataset_n, seed)?;
            let rtg = build_rtg_dataset(&data);
            let features = RtgFeatures::new(env.n_states(), env.k);
            let policy = train_mlp_rcsl(&rtg, 2, features, width, &train)?;
            row.width = Some(width);
            row.train_error = Some(policy.classification_error(&rtg));
            evaluate_return_conditioned(&env.mdp, &policy, optimal, seed)?
        }
        LinearQMethod::QLearning => {
            let data = build_linearq_dataset(u, cfg.dataset_n, seed)?;
            let qcfg = QConfig { width, target_update_epochs: cfg.target_update_epochs };
            let q = train_q_learning(&data, env.n_states(), 2, &train, &qcfg)?;
            row.width = Some(width);
            row.train_error = q.loss_curve.last().copied();
            markov_policy_return(&env.mdp, &q.greedy_policy(env.n_states(), env.mdp.horizon()))?
        }
        LinearQMethod::Naive => {
            let zeros = vec![0; env.n_states()];
            markov_policy_return(
                &env.mdp,
                &MarkovPolicy::stationary_deterministic(env.mdp.horizon(), &zeros, 2),
            )?
        }
    };
    row.achieved_return = Some(achieved);
    row.optimal_return = Some(optimal);
    row.gap = Some(optimal - achieved);
    row.gap_k_units = Some(env.in_k_units(optimal - achieved));
    Ok(row)
}

/// Trains MLP-RCSL and fitted Q-learning on the LinearQ dataset for every
/// `(u, width, seed)` cell and records the gap to the optimal return, in
/// absolute terms and in multiples of `k`. The naive always-0 policy is
/// included once per `u`.
pub fn linearq_sim(cfg: &LinearQSimConfig) -> Result<ExperimentReport> {
    if cfg.u_list.is_empty() || cfg.seeds.is_empty() {
        return Err(Error::InvalidParameter("need at least one u and one seed".into()));
    }
    cfg.train.validate()?;
    let mut jobs = Vec::new();
    for &u in &cfg.u_list {
        if u == 0 {
            return Err(Error::InvalidParameter("u must be >= 1".into()));
        }
        jobs.push((u, LinearQMethod::Naive, 0, 0));
        for &seed in &cfg.seeds {
            for w in &cfg.rcsl_widths {
                jobs.push((u, LinearQMethod::Rcsl, w.resolve(u), seed));
            }
            for w in &cfg.ql_widths {
                jobs.push((u, LinearQMethod::QLearning, w.resolve(u), seed));
            }
        }
    }
    jobs.sort();
    jobs.dedup();
    let rows: Vec<ReportRow> =
        jobs.par_iter().map(|&(u, m, w, s)| linearq_job(cfg, u, m, w, s)).collect::<Result<_>>()?;
    let mut report = with_train_params(ExperimentReport::new("linearq-sim"), &cfg.train)
        .param("u", join(&cfg.u_list))
        .param("rcsl_widths", join(&cfg.rcsl_widths))
        .param("ql_widths", join(&cfg.ql_widths))
        .param("seeds", join(&cfg.seeds))
        .param("dataset_n", cfg.dataset_n)
        .param("target_update_epochs", cfg.target_update_epochs);
    report.extend(rows);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmbiguityConfig {
    pub h0_list: Vec<usize>,
    pub seeds: Vec<u64>,
    pub width: usize,
    pub train: TrainConfig,
}

impl Default for AmbiguityConfig {
    fn default() -> Self {
        AmbiguityConfig {
            h0_list: vec![1, 2],
            seeds: vec![0, 1, 2, 3],
            width: 16,
            train: TrainConfig::default(),
        }
    }
}

const AMBIGUITY_TOL: f64 = 1e-9;
const IDENTITY_TOL: f64 = 1e-12;

fn ambiguity_job(cfg: &AmbiguityConfig, h0: usize, seed: u64) -> Result<Vec<ReportRow>> {
    let (r_good, r_bad) = (1.0, 0.0);
    let pair = build_reward_ambiguity_pair(h0, 1, r_good, r_bad)?;
    let g_star = pair.optimal_return();
    let rtg = build_rtg_dataset(&pair.d1);
    let features = RtgFeatures::new(1, 1.0);
    let policy = train_mlp_rcsl(&rtg, 2, features, cfg.width, &cfg.train.with_seed(seed))?;
    let first = policy.action_probs(&RcHistory::start(0, g_star))?;
    let first_step = |m: &crate::mdp::MdpSpec| -> f64 {
        first.iter().enumerate().map(|(a, p)| p * m.reward(0, 0, a)).sum()
    };
    let identity = first_step(&pair.m1) + first_step(&pair.m2);
    let identity_ok = (identity - (r_good + r_bad)).abs() <= IDENTITY_TOL;

    let instance = format!("h0={h0}");
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for (name, m) in [("rcsl-m1", &pair.m1), ("rcsl-m2", &pair.m2)] {
        let j = exact_expected_return_rc(m, &policy, g_star)?;
        let gap = (g_star - j).abs();
        worst = worst.max(gap);
        rows.push(ReportRow {
            seed: Some(seed),
            width: Some(cfg.width),
            achieved_return: Some(j),
            optimal_return: Some(g_star),
            gap: Some(gap),
            ..ReportRow::new(name, instance.clone())
        });
    }
    rows.push(ReportRow {
        seed: Some(seed),
        width: Some(cfg.width),
        optimal_return: Some(g_star),
        gap: Some(worst),
        passed: Some(worst >= 0.5 - AMBIGUITY_TOL && identity_ok),
        note: format!(
            "first action probs {first:?}; first-step rewards sum {identity} (r_g + r_b = {})",
            r_good + r_bad
        ),
        ..ReportRow::new("worst-case", instance)
    });
    Ok(rows)
}

/// Trains RCSL on the shared RTG dataset of the reward-ambiguity pair and
/// checks that one of the two MDPs is at least 1/2 short of optimal.
pub fn reward_ambiguity(cfg: &AmbiguityConfig) -> Result<ExperimentReport> {
    let jobs: Vec<(usize, u64)> =
        cfg.h0_list.iter().flat_map(|&h| cfg.seeds.iter().map(move |&s| (h, s))).collect();
    let rows: Vec<Vec<ReportRow>> =
        jobs.par_iter().map(|&(h, s)| ambiguity_job(cfg, h, s)).collect::<Result<_>>()?;
    let mut report = with_train_params(ExperimentReport::new("counterexample-reward-ambiguity"), &cfg.train)
        .param("h0", join(&cfg.h0_list))
        .param("seeds", join(&cfg.seeds))
        .param("width", cfg.width)
        .param("r_good", 1.0)
        .param("r_bad", 0.0);
    report.extend(rows.into_iter().flatten());
    Ok(report)
}

/// Exact and Monte Carlo returns of the mixture policy on the stitching
/// counterexample, conditioned on the optimal return 2.
pub fn stitching(seeds: &[u64], mc_episodes: usize) -> Result<ExperimentReport> {
    let c = build_stitch_counterexample();
    let g_star = exact_optimal_values(&c.mdp).optimal_return(&c.mdp);
    let policy = build_mixture_rc_policy(&c.dataset, c.mdp.n_actions())?;
    let j = exact_expected_return_rc(&c.mdp, &policy, g_star)?;
    let p_first = mixture_act(&policy, &RcHistory::start(0, g_star))?;

    let mut report = ExperimentReport::new("counterexample-stitching")
        .param("seeds", join(seeds))
        .param("mc_episodes", mc_episodes);
    report.push(ReportRow {
        achieved_return: Some(j),
        optimal_return: Some(g_star),
        gap: Some(g_star - j),
        rate: Some(p_first[0]),
        passed: Some(j < g_star),
        note: format!("exact enumeration; first-step action probs {p_first:?}"),
        ..ReportRow::new("mixture", "fig7")
    });
    let range = c.mdp.horizon() as f64;
    let mc: Vec<ReportRow> = seeds
        .par_iter()
        .map(|&seed| {
            let est = monte_carlo_return(&c.mdp, &policy, g_star, seed, mc_episodes)?;
            let bound = 3.0 * range * (1.0 / mc_episodes.max(1) as f64).sqrt();
            Ok(ReportRow {
                seed: Some(seed),
                achieved_return: Some(est),
                optimal_return: Some(g_star),
                gap: Some(g_star - est),
                passed: Some((est - j).abs() <= bound),
                note: format!("monte carlo over {mc_episodes} episodes; |mc - exact| <= {bound:.4}"),
                ..ReportRow::new("mixture-mc", "fig7")
            })
        })
        .collect::<Result<_>>()?;
    report.extend(mc);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MazeConfig {
    pub horizon: usize,
    pub n_per_script: usize,
    pub n_target: usize,
    pub max_attempts: usize,
    pub seeds: Vec<u64>,
    pub width: usize,
    pub eval_episodes: usize,
    pub train: TrainConfig,
}

impl Default for MazeConfig {
    fn default() -> Self {
        MazeConfig {
            horizon: 8,
            n_per_script: 10,
            n_target: 100,
            max_attempts: 10_000,
            seeds: vec![0, 1, 2, 3],
            width: 16,
            eval_episodes: 100,
            train: TrainConfig::default(),
        }
    }
}

fn maze_job(cfg: &MazeConfig, seed: u64) -> Result<Vec<ReportRow>> {
    let maze = build_grid_maze(cfg.horizon)?;
    let offline = generate_maze_dataset(&maze, cfg.n_per_script, cfg.n_per_script, seed)?;
    let optimal = exact_optimal_values(&maze.mdp).optimal_return(&maze.mdp);
    let train = cfg.train.with_seed(seed);
    let instance = format!("maze H={}", cfg.horizon);

    let mb = run_mbrcsl(
        &offline,
        &maze.mdp,
        &MbrcslConfig {
            rollout: RolloutConfig {
                n_target: cfg.n_target,
                max_attempts: cfg.max_attempts,
                rng_seed: seed,
                horizon: cfg.horizon,
            },
            train: train.clone(),
            width: cfg.width,
            eval_episodes: cfg.eval_episodes,
            rtg_unit: 1.0,
        },
    )?;
    let g_max = mb.report.g_max;
    let kept_ok = mb.report.rollout_dataset.iter().all(|t| t.total_return() > g_max);
    let mut note = format!(
        "desired rtg {}; kept {} of {} attempts",
        mb.desired_rtg,
        mb.report.rollout_dataset.len(),
        mb.report.attempts_used
    );
    if !mb.report.complete {
        note.push_str("; attempt budget exhausted before n_target");
    }
    let mbrcsl = ReportRow {
        seed: Some(seed),
        width: Some(cfg.width),
        achieved_return: Some(mb.eval_return),
        optimal_return: Some(optimal),
        gap: Some(optimal - mb.eval_return),
        rate: Some(mb.report.high_return_rate),
        g_max: Some(g_max),
        train_error: Some(mb.policy.classification_error(&build_rtg_dataset(&mb.report.rollout_dataset))),
        passed: Some(kept_ok && mb.eval_return > g_max),
        note,
        ..ReportRow::new("mbrcsl", instance.clone())
    };

    let rtg = build_rtg_dataset(&offline);
    let features = RtgFeatures::new(maze.mdp.n_states(), 1.0);
    let plain = train_mlp_rcsl(&rtg, maze.mdp.n_actions(), features, cfg.width, &train)?;
    let plain_return = monte_carlo_return(&maze.mdp, &plain, optimal, seed, cfg.eval_episodes)?;
    let baseline = ReportRow {
        seed: Some(seed),
        width: Some(cfg.width),
        achieved_return: Some(plain_return),
        optimal_return: Some(optimal),
        gap: Some(optimal - plain_return),
        g_max: Some(g_max),
        train_error: Some(plain.classification_error(&rtg)),
        passed: Some(plain_return <= g_max),
        note: format!("desired rtg {optimal}"),
        ..ReportRow::new("rcsl", instance)
    };
    Ok(vec![mbrcsl, baseline])
}

/// MBRCSL against plain RCSL on the grid maze with an equal mix of detour
/// and `S -> M` trajectories.
pub fn mbrcsl_maze(cfg: &MazeConfig) -> Result<ExperimentReport> {
    if cfg.seeds.is_empty() {
        return Err(Error::InvalidParameter("need at least one seed".into()));
    }
    let rows: Vec<Vec<ReportRow>> = cfg.seeds.par_iter().map(|&s| maze_job(cfg, s)).collect::<Result<_>>()?;
    let mut report = with_train_params(ExperimentReport::new("mbrcsl-maze"), &cfg.train)
        .param("horizon", cfg.horizon)
        .param("n_per_script", cfg.n_per_script)
        .param("n_target", cfg.n_target)
        .param("max_attempts", cfg.max_attempts)
        .param("seeds", join(&cfg.seeds))
        .param("width", cfg.width)
        .param("eval_episodes", cfg.eval_episodes);
    report.extend(rows.into_iter().flatten());
    Ok(report)
}

/// Hidden-width certificates for the LinearQ reward slice.
pub fn lower_bound(u_list: &[usize]) -> Result<ExperimentReport> {
    let rows: Vec<ReportRow> = u_list
        .par_iter()
        .map(|&u| {
            let c = linearq_certificate(u)?;
            Ok(ReportRow {
                u: Some(u),
                nonzero: Some(c.nonzero_count),
                lower_bound: Some(c.min_hidden_neurons),
                passed: Some(c.nonzero_count == u.saturating_sub(2)),
                note: c.slice_description,
                ..ReportRow::new("relu-lower-bound", format!("u={u}"))
            })
        })
        .collect::<Result<_>>()?;
    let mut report = ExperimentReport::new("lower-bound").param("u", join(u_list));
    report.extend(rows);
    Ok(report)
}
