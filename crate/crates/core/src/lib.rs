//! On-policy reinforcement learning with iteration-level empty-space search.
//!
//! PPO trains a Gaussian policy; every few iterations the last-epoch
//! checkpoints become anchors, Lennard-Jones particles search the empty
//! space between them, and the best-scoring candidate replaces the policy.

pub mod baselines;
pub mod candidates;
pub mod envs;
pub mod error;
pub mod esa;
pub mod evaluator;
pub mod harness;
pub mod nn;
pub mod pipeline;
pub mod ppo;
pub mod rollout;
pub mod seeding;
pub mod viz;

pub use error::{Error, Result};
