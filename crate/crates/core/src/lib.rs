//! Safe reinforcement learning with long- and short-term constraints.
//!
//! The crate bundles four pieces:
//!
//! * [`nn`]: dense networks with hand-written gradients and Adam,
//! * [`sim`]: a small seeded driving simulator with a sparse safety cost,
//! * [`rollout`]: on-policy collection, GAE and trajectory windows,
//! * [`train`]: the dual-constraint PPO learner and its multipliers,
//!
//! plus [`eval`] for frozen-policy evaluation and [`config`], [`checkpoint`],
//! [`metrics`] and [`plot`] for the command-line tool.

pub mod nn;
pub mod sim;
pub mod agent;
pub mod rollout;
pub mod seeding;
pub mod train;
pub mod eval;
pub mod checkpoint;
pub mod config;
pub mod metrics;
pub mod plot;
pub mod run;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/quickstart.md")]
    mod quickstart {}
    #[doc = include_str!("../../../book/src/simulator.md")]
    mod simulator {}
    #[doc = include_str!("../../../book/src/learner.md")]
    mod learner {}
    #[doc = include_str!("../../../book/src/configuration.md")]
    mod configuration {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
}
