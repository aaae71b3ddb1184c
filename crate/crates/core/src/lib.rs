//! Training framework for reward-personalized MDPs under a policy budget:
//! `n` agents with individual reward functions are served by `k < n`
//! representative policies, and the agent-to-policy assignment is learned
//! jointly with the policies to maximize utilitarian social welfare.
//!
//! The crate provides:
//! - the shared abstractions (environments, rollouts, welfare) in [`rmdp`],
//! - two built-in environments with exact oracles in [`envs`],
//! - a self-contained neural stack in [`nn`] and PPO on top of it in [`ppo`],
//! - both assignment learners (moving-average Q-table with greedy
//!   reassignment, and differentiable soft assignment logits) in [`assign`],
//! - comparison baselines in [`baselines`],
//! - an exact tabular solver for convergence verification in [`tabular`],
//! - end-to-end training loops in [`train`].

pub mod assign;
pub mod baselines;
pub mod envs;
pub mod error;
pub mod nn;
pub mod ppo;
pub mod rmdp;
pub mod tabular;
pub mod train;

pub use error::{Error, Result};
pub use rmdp::{
    social_welfare, Action, ActionSpec, AssignmentMatrix, Env, EnvId, Policy, RMdpSpec,
    TrajectoryBatch, Transition,
};
