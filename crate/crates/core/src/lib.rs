//! PPO with model-based exploration bonuses (POME) on small discrete MDPs.
//!
//! The crate is organised bottom-up: [`numkit`] provides arrays, a small
//! reverse-mode autodiff graph and Adam; [`envs`] the benchmark MDPs;
//! [`dynamics`] the learned reward/transition model; [`targets`] the
//! advantage computations; [`algorithm`] the training loop; [`cli`] the
//! command-line front end.

pub mod algorithm;
pub mod checkpoint;
pub mod cli;
pub mod dynamics;
pub mod envs;
mod error;
pub mod numkit;
pub mod seeding;
pub mod targets;

pub use error::{Error, Result};
