//! Lane-following traffic and static accident obstacles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::geometry::{Pose, Vec2};
use super::map::RoadMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    /// Vehicles per km per lane.
    pub density: f64,
    /// Probability of an accident obstacle cluster on each map segment.
    pub accident_prob: f64,
    pub speed_kmh: f64,
    /// No vehicle or obstacle is placed closer than this to the route start.
    pub spawn_clearance: f64,
    pub vehicle_half_length: f64,
    pub vehicle_half_width: f64,
    pub obstacle_radius: f64,
    /// Longitudinal gap under which a vehicle brakes.
    pub gap_distance: f64,
    pub gap_decel: f64,
    pub resume_accel: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            density: 12.0,
            accident_prob: 0.8,
            speed_kmh: 30.0,
            spawn_clearance: 20.0,
            vehicle_half_length: 2.25,
            vehicle_half_width: 1.0,
            obstacle_radius: 0.6,
            gap_distance: 10.0,
            gap_decel: 3.0,
            resume_accel: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub s: f64,
    pub lane: usize,
    pub speed: f64,
    pub target_speed: f64,
    pub half_length: f64,
    pub half_width: f64,
    pub pose: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Obstacle {
    pub centre: Vec2,
    pub radius: f64,
    pub s: f64,
    pub lane: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Traffic {
    pub vehicles: Vec<Vehicle>,
    pub obstacles: Vec<Obstacle>,
}

/// Places traffic for one episode. Vehicle counts per lane are Poisson with
/// mean `density * length_km`; every segment independently receives an
/// obstacle cluster of 2 to 4 discs with probability `accident_prob`.
pub fn populate_traffic(map: &RoadMap, cfg: &TrafficConfig, seed: u64) -> Traffic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut traffic = Traffic::default();
    let lo = cfg.spawn_clearance;
    let hi = map.length;

    if cfg.accident_prob > 0.0 {
        for seg in &map.segments {
            if !rng.random_bool(cfg.accident_prob.clamp(0.0, 1.0)) {
                continue;
            }
            let start = seg.s0.max(lo + 10.0);
            let end = (seg.s0 + seg.segment.length()).min(hi - 10.0);
            if end <= start {
                continue;
            }
            let s = rng.random_range(start..end);
            let lane = rng.random_range(0..map.lane_count);
            let count = rng.random_range(2..=4usize);
            let spread = (map.lane_width / 2.0 - cfg.obstacle_radius - 0.05).max(0.0);
            for k in 0..count {
                let frac = k as f64 / (count - 1) as f64;
                let lateral = map.lane_offset(lane) - spread + 2.0 * spread * frac;
                let ds = rng.random_range(-1.0..1.0);
                let pose = map.offset_pose(s + ds, lateral);
                traffic.obstacles.push(Obstacle {
                    centre: pose.position(),
                    radius: cfg.obstacle_radius,
                    s: s + ds,
                    lane,
                });
            }
        }
    }

    let mean = cfg.density.max(0.0) * map.length / 1000.0;
    if mean > 0.0 && hi > lo {
        let poisson = Poisson::new(mean).expect("positive Poisson mean");
        let speed = cfg.speed_kmh / 3.6;
        let min_gap = 2.0 * cfg.vehicle_half_length + 2.0;
        for lane in 0..map.lane_count {
            let count = poisson.sample(&mut rng) as usize;
            let mut placed: Vec<f64> = Vec::with_capacity(count);
            for _ in 0..count {
                let mut chosen = None;
                for _ in 0..20 {
                    let s = rng.random_range(lo..hi);
                    let clear_of_cars = placed.iter().all(|&o| (o - s).abs() >= min_gap);
                    let clear_of_obstacles = traffic.obstacles.iter().all(|ob| {
                        ob.lane != lane
                            || (ob.s - s).abs() >= cfg.vehicle_half_length + ob.radius + 5.0
                    });
                    if clear_of_cars && clear_of_obstacles {
                        chosen = Some(s);
                        break;
                    }
                }
                let Some(s) = chosen else { continue };
                placed.push(s);
                traffic.vehicles.push(Vehicle {
                    s,
                    lane,
                    speed,
                    target_speed: speed,
                    half_length: cfg.vehicle_half_length,
                    half_width: cfg.vehicle_half_width,
                    pose: map.offset_pose(s, map.lane_offset(lane)),
                });
            }
        }
    }
    traffic
}

/// The ego as seen by the traffic's gap keeping.
#[derive(Debug, Clone, Copy)]
pub(crate) struct EgoFootprint {
    pub s: f64,
    pub lateral: f64,
    pub radius: f64,
}

/// Advances every vehicle by one step. Speeds are decided from the
/// positions at the start of the step, then all vehicles move.
pub(crate) fn advance_traffic(
    traffic: &mut Traffic,
    map: &RoadMap,
    cfg: &TrafficConfig,
    ego: EgoFootprint,
    dt: f64,
) {
    let n = traffic.vehicles.len();
    let mut speeds = Vec::with_capacity(n);
    for (i, v) in traffic.vehicles.iter().enumerate() {
        let front = v.s + v.half_length;
        let mut gap = f64::INFINITY;
        for (j, o) in traffic.vehicles.iter().enumerate() {
            if j != i && o.lane == v.lane && o.s > v.s {
                gap = gap.min(o.s - o.half_length - front);
            }
        }
        for ob in &traffic.obstacles {
            if ob.lane == v.lane && ob.s > v.s {
                gap = gap.min(ob.s - ob.radius - front);
            }
        }
        let lane_lat = map.lane_offset(v.lane);
        let ego_in_lane = (ego.lateral - lane_lat).abs() < map.lane_width / 2.0 + ego.radius * 0.5;
        if ego_in_lane && ego.s > v.s {
            gap = gap.min(ego.s - ego.radius - front);
        }
        let speed = if gap < cfg.gap_distance {
            (v.speed - cfg.gap_decel * dt).max(0.0)
        } else {
            (v.speed + cfg.resume_accel * dt).min(v.target_speed)
        };
        speeds.push(speed);
    }
    let lane_offsets: Vec<f64> = (0..map.lane_count).map(|l| map.lane_offset(l)).collect();
    for (v, speed) in traffic.vehicles.iter_mut().zip(speeds) {
        v.speed = speed;
        v.s += speed * dt;
        v.pose = map.offset_pose(v.s, lane_offsets[v.lane]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::map::Segment;

    fn straight(len: f64) -> RoadMap {
        RoadMap::from_segments(&[Segment::Straight { length: len }], 3, 3.5).unwrap()
    }

    #[test]
    fn empty_when_disabled() {
        let cfg = TrafficConfig {
            density: 0.0,
            accident_prob: 0.0,
            ..TrafficConfig::default()
        };
        let t = populate_traffic(&straight(500.0), &cfg, 3);
        assert!(t.vehicles.is_empty() && t.obstacles.is_empty());
    }

    #[test]
    fn deterministic_placement() {
        let map = straight(400.0);
        let cfg = TrafficConfig::default();
        assert_eq!(populate_traffic(&map, &cfg, 11), populate_traffic(&map, &cfg, 11));
    }

    #[test]
    fn spawn_zone_is_clear() {
        let map = straight(300.0);
        let cfg = TrafficConfig {
            accident_prob: 1.0,
            density: 30.0,
            ..TrafficConfig::default()
        };
        for seed in 0..50 {
            let t = populate_traffic(&map, &cfg, seed);
            assert!(t.vehicles.iter().all(|v| v.s >= cfg.spawn_clearance));
            assert!(t.obstacles.iter().all(|o| o.s >= cfg.spawn_clearance));
        }
    }

    #[test]
    fn obstacle_clusters_block_one_lane() {
        let map = straight(300.0);
        let cfg = TrafficConfig {
            accident_prob: 1.0,
            density: 0.0,
            ..TrafficConfig::default()
        };
        let t = populate_traffic(&map, &cfg, 5);
        assert!((2..=4).contains(&t.obstacles.len()));
        let lane = t.obstacles[0].lane;
        assert!(t.obstacles.iter().all(|o| o.lane == lane));
    }

    #[test]
    fn vehicles_brake_behind_obstacle() {
        let map = straight(300.0);
        let cfg = TrafficConfig::default();
        let mut traffic = Traffic {
            vehicles: vec![Vehicle {
                s: 100.0,
                lane: 0,
                speed: 8.0,
                target_speed: 8.0,
                half_length: 2.25,
                half_width: 1.0,
                pose: map.offset_pose(100.0, 3.5),
            }],
            obstacles: vec![Obstacle {
                centre: map.offset_pose(110.0, 3.5).position(),
                radius: 0.6,
                s: 110.0,
                lane: 0,
            }],
        };
        let ego = EgoFootprint {
            s: 0.0,
            lateral: 0.0,
            radius: 1.0,
        };
        advance_traffic(&mut traffic, &map, &cfg, ego, 0.1);
        assert!((traffic.vehicles[0].speed - 7.7).abs() < 1e-12);
    }
}
