//! Tabular offline-RL laboratory.
//!
//! Exact dynamic programming and return-conditioned evaluation for
//! finite-horizon MDPs, the LinearQ family and counterexample environments,
//! a from-scratch two-layer ReLU network, return-conditioned supervised
//! learning (RCSL), fitted Q-learning, and a tabular model-based rollout
//! pipeline that stitches trajectories before running RCSL.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod environments;
pub mod error;
pub mod experiments;
pub mod learners;
pub mod mbrcsl;
pub mod mdp;
pub mod nn;
pub mod report;
pub mod rng;

pub use error::{Error, Result};
pub use mdp::{
    build_rtg_dataset, coverage_checks, evaluate_return_conditioned, exact_expected_return_rc,
    exact_optimal_values, rollout_markov, MarkovPolicy, MdpSpec, RcHistory, ReturnConditionedPolicy,
    RtgDataset, Trajectory, ValueTables,
};
pub use nn::{Mlp2, TrainConfig};
pub use report::ExperimentReport;
