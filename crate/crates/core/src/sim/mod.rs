//! A seeded 2D driving environment: a multi-lane road built from straight
//! and arc segments, lane-following traffic, accident obstacles, a
//! kinematic-bicycle ego vehicle, a 30-beam lidar and a sparse safety cost.
//!
//! Given a map, a traffic seed and an action sequence, every step is
//! bit-for-bit reproducible.

pub mod geometry;
mod lidar;
pub mod map;
pub mod observation;
pub mod reward;
pub mod traffic;
pub mod world;

pub use lidar::lidar_scan;
pub use map::{build_map, MapSpec, RandomMapSpec, RoadMap, Segment};
pub use observation::{build_observation, Observation, OBS_DIM};
pub use reward::{compute_reward, RewardParts, RewardWeights};
pub use traffic::{populate_traffic, Obstacle, Traffic, TrafficConfig, Vehicle};
pub use world::{bicycle_step, is_infeasible, Ego, Env, EnvConfig, Status, StepInfo, StepOutcome, WorldState};

use thiserror::Error;

/// Dimension of the action vector: steering and acceleration commands.
pub const ACTION_DIM: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("map configuration error: {0}")]
    Config(String),
    #[error("episode already finished ({0:?}); reset before stepping")]
    EpisodeOver(Status),
    #[error("non-finite action {0:?}")]
    InvalidAction([f64; 2]),
}
