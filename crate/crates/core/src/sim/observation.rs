//! The 49-slot observation vector.
//!
//! | slots    | content                                                       | range   |
//! |----------|---------------------------------------------------------------|---------|
//! | 0..30    | lidar distances / range                                       | [0, 1]  |
//! | 30       | steering angle / steering limit                               | [-1, 1] |
//! | 31       | heading error to the route tangent / pi                       | [-1, 1] |
//! | 32       | yaw rate in rad/s, clipped                                    | [-1, 1] |
//! | 33       | speed / v_max                                                 | [0, 1]  |
//! | 34       | distance to left road boundary / road half-width, clipped     | [0, 1]  |
//! | 35       | distance to right road boundary / road half-width, clipped    | [0, 1]  |
//! | 36       | previous steering command                                     | [-1, 1] |
//! | 37       | previous acceleration command                                 | [-1, 1] |
//! | 38       | offset from the nearest lane centre / lane width, clipped     | [-1, 1] |
//! | 39..49   | distance to the next 10 checkpoints / 500 m, clipped; 0 if none | [0, 1]  |

use std::ops::Deref;

use super::geometry::wrap_angle;
use super::lidar::lidar_scan;
use super::map::RoadMap;
use super::world::{EnvConfig, WorldState};

pub const OBS_DIM: usize = 49;
pub const LIDAR_SLOTS: usize = 30;
pub const EGO_SLOTS: usize = 9;
pub const CHECKPOINT_SLOTS: usize = 10;
pub const EGO_OFFSET: usize = LIDAR_SLOTS;
pub const CHECKPOINT_OFFSET: usize = LIDAR_SLOTS + EGO_SLOTS;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Deref for Observation {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl Observation {
    /// Declared `(lo, hi)` bounds of every slot.
    pub fn bounds(slot: usize) -> (f64, f64) {
        match slot {
            s if s < LIDAR_SLOTS => (0.0, 1.0),
            s if s < CHECKPOINT_OFFSET => match s - EGO_OFFSET {
                3..=5 => (0.0, 1.0),
                _ => (-1.0, 1.0),
            },
            _ => (0.0, 1.0),
        }
    }

    pub fn in_bounds(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &v)| {
            let (lo, hi) = Self::bounds(i);
            v.is_finite() && v >= lo && v <= hi
        })
    }

    pub fn lidar(&self) -> &[f64] {
        &self.0[..LIDAR_SLOTS]
    }

    pub fn ego(&self) -> &[f64] {
        &self.0[EGO_OFFSET..CHECKPOINT_OFFSET]
    }

    pub fn checkpoints(&self) -> &[f64] {
        &self.0[CHECKPOINT_OFFSET..]
    }
}

pub fn build_observation(world: &WorldState, map: &RoadMap, cfg: &EnvConfig) -> Observation {
    let mut obs = [0.0; OBS_DIM];
    let ego = &world.ego;
    let position = ego.pose.position();

    let scan = lidar_scan(
        position,
        ego.pose.heading,
        map,
        &world.traffic,
        LIDAR_SLOTS,
        cfg.lidar_range,
    );
    obs[..LIDAR_SLOTS].copy_from_slice(&scan);

    let hw = map.half_width();
    let lane_centre = map.lane_offset(map.lane_at(ego.lateral));
    let ego_block = [
        (ego.steering / cfg.max_steer).clamp(-1.0, 1.0),
        wrap_angle(ego.pose.heading - ego.route_heading) / std::f64::consts::PI,
        ego.yaw_rate.clamp(-1.0, 1.0),
        (ego.speed / cfg.v_max()).clamp(0.0, 1.0),
        ((hw - ego.lateral) / hw).clamp(0.0, 1.0),
        ((hw + ego.lateral) / hw).clamp(0.0, 1.0),
        ego.prev_action[0],
        ego.prev_action[1],
        ((ego.lateral - lane_centre) / map.lane_width).clamp(-1.0, 1.0),
    ];
    obs[EGO_OFFSET..CHECKPOINT_OFFSET].copy_from_slice(&ego_block);

    let upcoming = map
        .checkpoints
        .iter()
        .filter(|&&s| s >= ego.progress)
        .take(CHECKPOINT_SLOTS);
    for (slot, &s) in obs[CHECKPOINT_OFFSET..].iter_mut().zip(upcoming) {
        let d = (map.pose_at(s).position() - position).norm();
        *slot = (d / cfg.checkpoint_norm).clamp(0.0, 1.0);
    }
    Observation(obs)
}
