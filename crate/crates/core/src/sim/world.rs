use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::geometry::{point_box_distance, wrap_angle, Pose};
use super::map::RoadMap;
use super::observation::{build_observation, Observation};
use super::reward::{compute_reward, RewardParts, RewardWeights};
use super::traffic::{advance_traffic, populate_traffic, EgoFootprint, Traffic, TrafficConfig};
use super::SimError;

/// Vehicle and episode constants of the driving environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub dt: f64,
    /// Steering limit, radians.
    pub max_steer: f64,
    pub wheelbase: f64,
    pub accel_min: f64,
    pub accel_max: f64,
    pub v_max_kmh: f64,
    pub ego_radius: f64,
    pub max_steps: usize,
    pub lane_count: usize,
    pub lane_width: f64,
    pub lidar_rays: usize,
    pub lidar_range: f64,
    pub checkpoint_norm: f64,
    pub reward: RewardWeights,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            max_steer: 0.6,
            wheelbase: 2.5,
            accel_min: -5.0,
            accel_max: 3.0,
            v_max_kmh: 80.0,
            ego_radius: 1.0,
            max_steps: 1000,
            lane_count: 3,
            lane_width: 3.5,
            lidar_rays: 30,
            lidar_range: 50.0,
            checkpoint_norm: 500.0,
            reward: RewardWeights::default(),
        }
    }
}

impl EnvConfig {
    pub fn v_max(&self) -> f64 {
        self.v_max_kmh / 3.6
    }

    /// Maps an acceleration command in `[-1, 1]` piecewise-linearly onto
    /// `[accel_min, accel_max]` with 0 mapping to 0.
    pub fn acceleration(&self, cmd: f64) -> f64 {
        if cmd >= 0.0 {
            cmd * self.accel_max
        } else {
            -cmd * self.accel_min
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Running,
    Success,
    LaneDeparture,
    MaxSteps,
}

impl Status {
    pub fn is_terminal(self) -> bool {
        self != Status::Running
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Running => "running",
            Status::Success => "success",
            Status::LaneDeparture => "lane_departure",
            Status::MaxSteps => "max_steps",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Ego {
    pub pose: Pose,
    pub speed: f64,
    /// Current steering angle, radians.
    pub steering: f64,
    pub yaw_rate: f64,
    pub prev_action: [f64; 2],
    /// Route arc length of the projected position.
    pub progress: f64,
    /// Signed offset from the route reference line (left positive).
    pub lateral: f64,
    /// Route heading at the projected position.
    pub route_heading: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub ego: Ego,
    pub traffic: Traffic,
    pub steps: usize,
    pub status: Status,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepInfo {
    pub collision: bool,
    pub departure: bool,
    pub progress: f64,
    pub reward_parts: RewardParts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub cost: u8,
    /// Whether the state reached by this step is feasible.
    pub feasible: bool,
    pub status: Status,
    pub info: StepInfo,
}

/// A state is infeasible exactly when the step that produced it incurred cost.
pub fn is_infeasible(outcome: &StepOutcome) -> bool {
    outcome.cost > 0
}

/// One explicit-Euler step of the kinematic bicycle model about the rear
/// axle. Position and heading advance with the speed at the start of the
/// step; the speed is then updated and clipped to `[0, v_max]`.
pub fn bicycle_step(
    pose: Pose,
    speed: f64,
    steering: f64,
    accel: f64,
    wheelbase: f64,
    dt: f64,
    v_max: f64,
) -> (Pose, f64, f64) {
    let yaw_rate = speed / wheelbase * steering.tan();
    let next = Pose::new(
        pose.x + speed * pose.heading.cos() * dt,
        pose.y + speed * pose.heading.sin() * dt,
        pose.heading + yaw_rate * dt,
    );
    let speed = (speed + accel * dt).clamp(0.0, v_max);
    (next, speed, yaw_rate)
}

/// A single driving episode on a shared map.
#[derive(Debug, Clone)]
pub struct Env {
    map: Arc<RoadMap>,
    config: EnvConfig,
    traffic_config: TrafficConfig,
    world: WorldState,
}

impl Env {
    pub fn new(map: Arc<RoadMap>, config: EnvConfig, traffic_config: TrafficConfig, seed: u64) -> Self {
        let world = Self::spawn(&map, &config, &traffic_config, seed);
        Self {
            map,
            config,
            traffic_config,
            world,
        }
    }

    fn spawn(map: &RoadMap, config: &EnvConfig, traffic_config: &TrafficConfig, seed: u64) -> WorldState {
        let lane = map.lane_count / 2;
        let lateral = map.lane_offset(lane);
        let pose = map.offset_pose(0.0, lateral);
        WorldState {
            ego: Ego {
                pose,
                progress: 0.0,
                lateral,
                route_heading: pose.heading,
                ..Ego::default()
            },
            traffic: populate_traffic(map, traffic_config, seed),
            steps: 0,
            status: Status::Running,
        }
        .with_max_steps_check(config)
    }

    /// Starts a new episode with fresh traffic drawn from `seed`.
    pub fn reset(&mut self, seed: u64) -> Observation {
        self.world = Self::spawn(&self.map, &self.config, &self.traffic_config, seed);
        self.observe()
    }

    /// Switches to another map and starts a new episode on it.
    pub fn reset_on(&mut self, map: Arc<RoadMap>, seed: u64) -> Observation {
        self.map = map;
        self.reset(seed)
    }

    pub fn map(&self) -> &RoadMap {
        &self.map
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn world_mut(&mut self) -> &mut WorldState {
        &mut self.world
    }

    pub fn observe(&self) -> Observation {
        build_observation(&self.world, &self.map, &self.config)
    }

    pub fn step(&mut self, action: [f64; 2]) -> Result<StepOutcome, SimError> {
        if self.world.status.is_terminal() {
            return Err(SimError::EpisodeOver(self.world.status));
        }
        if action.iter().any(|a| !a.is_finite()) {
            return Err(SimError::InvalidAction(action));
        }
        let cfg = &self.config;
        let map = &self.map;
        let steer_cmd = action[0].clamp(-1.0, 1.0);
        let accel_cmd = action[1].clamp(-1.0, 1.0);
        let v_max = cfg.v_max();

        let before = self.world.ego;
        advance_traffic(
            &mut self.world.traffic,
            map,
            &self.traffic_config,
            EgoFootprint {
                s: before.progress,
                lateral: before.lateral,
                radius: cfg.ego_radius,
            },
            cfg.dt,
        );

        let steering = steer_cmd * cfg.max_steer;
        let (pose, speed, yaw_rate) = bicycle_step(
            before.pose,
            before.speed,
            steering,
            cfg.acceleration(accel_cmd),
            cfg.wheelbase,
            cfg.dt,
            v_max,
        );
        let proj = map.project(pose.position());
        let ego = Ego {
            pose,
            speed,
            steering,
            yaw_rate,
            prev_action: [steer_cmd, accel_cmd],
            progress: proj.s,
            lateral: proj.lateral,
            route_heading: proj.heading,
        };
        self.world.ego = ego;
        self.world.steps += 1;

        let collision = self.ego_collides();
        let departure = proj.distance() > map.half_width();
        let cost = collision as u8 + departure as u8;

        let status = if departure {
            Status::LaneDeparture
        } else if proj.s >= map.length {
            Status::Success
        } else if self.world.steps >= cfg.max_steps {
            Status::MaxSteps
        } else {
            Status::Running
        };
        self.world.status = status;

        let terminal = match status {
            Status::Success => cfg.reward.success,
            Status::LaneDeparture => cfg.reward.departure,
            _ => 0.0,
        };
        let parts = RewardParts {
            distance: ego.progress - before.progress,
            speed: speed / v_max,
            yaw: wrap_angle(pose.heading - before.pose.heading).abs(),
            steering: steering.abs() / cfg.max_steer,
            terminal,
        };
        Ok(StepOutcome {
            observation: self.observe(),
            reward: compute_reward(&parts, &cfg.reward),
            cost,
            feasible: cost == 0,
            status,
            info: StepInfo {
                collision,
                departure,
                progress: ego.progress,
                reward_parts: parts,
            },
        })
    }

    fn ego_collides(&self) -> bool {
        let p = self.world.ego.pose.position();
        let r = self.config.ego_radius;
        self.world
            .traffic
            .obstacles
            .iter()
            .any(|o| (o.centre - p).norm() <= o.radius + r)
            || self
                .world
                .traffic
                .vehicles
                .iter()
                .any(|v| point_box_distance(p, v.pose, v.half_length, v.half_width) <= r)
    }
}

impl WorldState {
    fn with_max_steps_check(mut self, config: &EnvConfig) -> Self {
        if config.max_steps == 0 {
            self.status = Status::MaxSteps;
        }
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::map::Segment;
    use crate::sim::traffic::Obstacle;

    fn empty_env(len: f64) -> Env {
        let map = Arc::new(RoadMap::from_segments(&[Segment::Straight { length: len }], 3, 3.5).unwrap());
        let traffic = TrafficConfig {
            density: 0.0,
            accident_prob: 0.0,
            ..TrafficConfig::default()
        };
        Env::new(map, EnvConfig::default(), traffic, 0)
    }

    #[test]
    fn zero_steer_keeps_heading() {
        let mut env = empty_env(300.0);
        env.world_mut().ego.speed = 10.0;
        let out = env.step([0.0, 0.5]).unwrap();
        assert_eq!(env.world().ego.pose.heading, 0.0);
        assert_eq!(out.cost, 0);
        assert!(out.feasible);
    }

    #[test]
    fn bicycle_yaw_rate() {
        let (_, _, w) = bicycle_step(Pose::default(), 10.0, 0.1, 0.0, 2.5, 0.1, 22.2);
        assert!((w - 0.401_34).abs() < 1e-5);
        assert!((w - 4.0 * 0.1f64.tan()).abs() < 1e-15);
    }

    #[test]
    fn coasting_is_constant() {
        let mut env = empty_env(500.0);
        env.world_mut().ego.speed = 12.0;
        for _ in 0..20 {
            env.step([0.0, 0.0]).unwrap();
            assert_eq!(env.world().ego.speed, 12.0);
            assert_eq!(env.world().ego.pose.heading, 0.0);
        }
    }

    #[test]
    fn overlapping_obstacle_costs_one() {
        let mut env = empty_env(300.0);
        env.world_mut().traffic.obstacles.push(Obstacle {
            centre: crate::sim::geometry::Vec2::new(0.5, 0.0),
            radius: 0.6,
            s: 0.5,
            lane: 1,
        });
        let out = env.step([0.0, 0.0]).unwrap();
        assert_eq!(out.cost, 1);
        assert!(out.info.collision);
        assert!(is_infeasible(&out));
        assert_eq!(out.status, Status::Running, "collisions do not end the episode");
    }

    #[test]
    fn departure_terminates_with_penalty() {
        let mut env = empty_env(300.0);
        let ego = &mut env.world_mut().ego;
        ego.pose.y = 5.2;
        ego.pose.heading = 0.5;
        ego.speed = 10.0;
        let out = env.step([0.0, 0.0]).unwrap();
        assert_eq!(out.status, Status::LaneDeparture);
        assert_eq!(out.cost, 1);
        assert_eq!(out.info.reward_parts.terminal, -5.0);
        assert!(matches!(env.step([0.0, 0.0]), Err(SimError::EpisodeOver(Status::LaneDeparture))));
    }

    #[test]
    fn reaching_destination_succeeds() {
        let mut env = empty_env(100.0);
        env.world_mut().ego.pose.x = 99.5;
        env.world_mut().ego.progress = 99.5;
        env.world_mut().ego.speed = 10.0;
        let out = env.step([0.0, 0.0]).unwrap();
        assert_eq!(out.status, Status::Success);
        assert_eq!(out.info.reward_parts.terminal, 10.0);
    }

    #[test]
    fn max_steps_ends_episode() {
        let map = Arc::new(RoadMap::from_segments(&[Segment::Straight { length: 300.0 }], 3, 3.5).unwrap());
        let cfg = EnvConfig {
            max_steps: 3,
            ..EnvConfig::default()
        };
        let mut env = Env::new(map, cfg, TrafficConfig::default(), 1);
        let statuses: Vec<_> = (0..3).map(|_| env.step([0.0, -1.0]).unwrap().status).collect();
        assert_eq!(statuses, vec![Status::Running, Status::Running, Status::MaxSteps]);
    }

    #[test]
    fn acceleration_mapping() {
        let cfg = EnvConfig::default();
        assert_eq!(cfg.acceleration(1.0), 3.0);
        assert_eq!(cfg.acceleration(-1.0), -5.0);
        assert_eq!(cfg.acceleration(0.0), 0.0);
        assert!((cfg.v_max() - 22.222).abs() < 1e-3);
    }
}
