//! Offline learners: MLP return-conditioned supervised learning, fitted
//! Q-learning, tabular maximum-likelihood models and the mixture
//! return-conditioned policy.

mod mixture;
mod qlearn;
mod rcsl;
mod tabular;

pub use mixture::{build_mixture_rc_policy, mixture_act, MixtureRcPolicy};
pub use qlearn::{train_q_learning, QConfig, QLearner};
pub use rcsl::{train_mlp_rcsl, RcslMlpPolicy, RtgFeatures};
pub use tabular::{fit_tabular_behavior, fit_tabular_dynamics, TabularBehavior, TabularDynamics};
