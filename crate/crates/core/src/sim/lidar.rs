use std::f64::consts::TAU;

use super::geometry::{ray_box, ray_circle, ray_circle_outline, ray_segment, Vec2};
use super::map::{RoadMap, Segment};
use super::traffic::Traffic;

/// Casts `rays` beams at equal spacing over a full turn, beam 0 along
/// `heading`, and returns hit distances divided by `range` (1.0 when nothing
/// is hit within range). Vehicles, obstacles and the outer road boundaries
/// all reflect.
pub fn lidar_scan(
    origin: Vec2,
    heading: f64,
    map: &RoadMap,
    traffic: &Traffic,
    rays: usize,
    range: f64,
) -> Vec<f64> {
    let reach = |centre: Vec2, extent: f64| (centre - origin).norm() <= range + extent;
    let obstacles: Vec<_> = traffic
        .obstacles
        .iter()
        .filter(|o| reach(o.centre, o.radius))
        .collect();
    let vehicles: Vec<_> = traffic
        .vehicles
        .iter()
        .filter(|v| reach(v.pose.position(), v.half_length.hypot(v.half_width)))
        .collect();
    let hw = map.half_width();

    (0..rays)
        .map(|k| {
            let dir = Vec2::from_angle(heading + k as f64 * TAU / rays as f64);
            let mut best = range;
            for o in &obstacles {
                if let Some(t) = ray_circle(origin, dir, o.centre, o.radius) {
                    best = best.min(t);
                }
            }
            for v in &vehicles {
                if let Some(t) = ray_box(origin, dir, v.pose, v.half_length, v.half_width) {
                    best = best.min(t);
                }
            }
            for seg in &map.segments {
                match seg.segment {
                    Segment::Straight { length } => {
                        for side in [hw, -hw] {
                            let a = seg.start.position() + seg.start.left() * side;
                            let b = a + seg.start.forward() * length;
                            if let Some(t) = ray_segment(origin, dir, a, b) {
                                best = best.min(t);
                            }
                        }
                    }
                    Segment::Arc { sweep, .. } => {
                        let (sign, radius, c) = seg.arc_centre().expect("arc");
                        for side in [hw, -hw] {
                            let rho = radius - sign * side;
                            for t in ray_circle_outline(origin, dir, c, rho).into_iter().flatten() {
                                if t >= best {
                                    continue;
                                }
                                let hit = origin + dir * t;
                                let delta = seg.arc_delta(hit).expect("arc");
                                if (0.0..=sweep.abs()).contains(&delta) {
                                    best = t;
                                }
                            }
                        }
                    }
                }
            }
            (best / range).clamp(0.0, 1.0)
        })
        .collect()
}
