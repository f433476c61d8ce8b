//! Road maps composed of straight and circular-arc segments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::geometry::{wrap_angle, Pose, Vec2};
use super::SimError;

/// Spacing of route checkpoints along the centerline, in metres.
pub const CHECKPOINT_SPACING: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Segment {
    Straight { length: f64 },
    /// Positive `sweep` turns left (counter-clockwise).
    Arc { radius: f64, sweep: f64 },
}

impl Segment {
    pub fn length(&self) -> f64 {
        match *self {
            Segment::Straight { length } => length,
            Segment::Arc { radius, sweep } => radius * sweep.abs(),
        }
    }
}

/// Parameters for random map generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomMapSpec {
    pub min_segments: usize,
    pub max_segments: usize,
    pub straight_length: (f64, f64),
    pub arc_radius: (f64, f64),
    /// Range of the absolute sweep angle of arcs, radians.
    pub arc_sweep: (f64, f64),
    pub total_length: (f64, f64),
}

impl Default for RandomMapSpec {
    fn default() -> Self {
        Self {
            min_segments: 3,
            max_segments: 5,
            straight_length: (60.0, 150.0),
            arc_radius: (40.0, 120.0),
            arc_sweep: (0.3, 1.2),
            total_length: (300.0, 600.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    Fixed { segments: Vec<Segment> },
    Random(RandomMapSpec),
}

impl Default for MapSpec {
    fn default() -> Self {
        MapSpec::Random(RandomMapSpec::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacedSegment {
    pub segment: Segment,
    pub start: Pose,
    /// Arc length of the route at the segment start.
    pub s0: f64,
}

/// Foot point of a world position on the route.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Route arc length, clamped to `[0, length]`.
    pub s: f64,
    /// Signed offset to the left of the direction of travel.
    pub lateral: f64,
    /// Distance beyond the route ends along the end tangent (0 on the route).
    pub overshoot: f64,
    /// Route heading at `s`.
    pub heading: f64,
}

impl Projection {
    /// Distance from the route reference line.
    pub fn distance(&self) -> f64 {
        self.lateral.hypot(self.overshoot)
    }
}

impl PlacedSegment {
    fn length(&self) -> f64 {
        self.segment.length()
    }

    /// `(sign, radius, centre)` of an arc segment.
    pub(crate) fn arc_centre(&self) -> Option<(f64, f64, Vec2)> {
        match self.segment {
            Segment::Arc { radius, sweep } => {
                let sign = sweep.signum();
                let c = self.start.position() + self.start.left() * (sign * radius);
                Some((sign, radius, c))
            }
            Segment::Straight { .. } => None,
        }
    }

    /// Pose at arc length `t` from the segment start; `t` outside the
    /// segment extrapolates along the end tangents.
    pub fn pose_at(&self, t: f64) -> Pose {
        let len = self.length();
        if t < 0.0 {
            let p = self.start.position() + self.start.forward() * t;
            return Pose::new(p.x, p.y, self.start.heading);
        }
        match self.segment {
            Segment::Straight { .. } => {
                let p = self.start.position() + self.start.forward() * t;
                Pose::new(p.x, p.y, self.start.heading)
            }
            Segment::Arc { .. } => {
                let (sign, radius, c) = self.arc_centre().expect("arc");
                let tt = t.min(len);
                let h = self.start.heading + sign * tt / radius;
                let left = Vec2::new(-h.sin(), h.cos());
                let p = c - left * (sign * radius);
                let end = Pose::new(p.x, p.y, h);
                if t > len {
                    let q = end.position() + end.forward() * (t - len);
                    Pose::new(q.x, q.y, h)
                } else {
                    end
                }
            }
        }
    }

    pub fn end(&self) -> Pose {
        self.pose_at(self.length())
    }

    /// Swept angle from the arc start to the radius through `p`, measured in
    /// the turning direction. Values in `[0, |sweep|]` lie on the arc.
    pub(crate) fn arc_delta(&self, p: Vec2) -> Option<f64> {
        let (sign, _, c) = self.arc_centre()?;
        let Segment::Arc { sweep, .. } = self.segment else {
            return None;
        };
        let r = p - c;
        let h = r.y.atan2(r.x) + sign * std::f64::consts::FRAC_PI_2;
        let half = sweep.abs() / 2.0;
        Some(sign * wrap_angle(h - self.start.heading - sign * half) + half)
    }

    /// Local projection: `(t, lateral, overshoot, heading)` relative to this segment.
    fn project(&self, p: Vec2) -> (f64, f64, f64, f64) {
        let len = self.length();
        let along_frame = |pose: Pose, p: Vec2| {
            let v = p - pose.position();
            (v.dot(pose.forward()), v.dot(pose.left()))
        };
        match self.segment {
            Segment::Straight { .. } => {
                let (t, lat) = along_frame(self.start, p);
                if t < 0.0 {
                    (0.0, lat, -t, self.start.heading)
                } else if t > len {
                    (len, lat, t - len, self.start.heading)
                } else {
                    (t, lat, 0.0, self.start.heading)
                }
            }
            Segment::Arc { sweep, .. } => {
                let (sign, radius, c) = self.arc_centre().expect("arc");
                let rho = (p - c).norm();
                let delta = self.arc_delta(p).expect("arc");
                if delta < 0.0 {
                    let (t, lat) = along_frame(self.start, p);
                    (0.0, lat, -t.min(0.0), self.start.heading)
                } else if delta > sweep.abs() {
                    let end = self.end();
                    let (t, lat) = along_frame(end, p);
                    (len, lat, t.max(0.0), end.heading)
                } else {
                    (
                        delta * radius,
                        sign * (radius - rho),
                        0.0,
                        self.start.heading + sign * delta,
                    )
                }
            }
        }
    }
}

/// A one-way road of `lane_count` lanes following a centerline route.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadMap {
    pub segments: Vec<PlacedSegment>,
    pub lane_count: usize,
    pub lane_width: f64,
    pub length: f64,
    /// Checkpoint arc lengths, every 50 m plus the destination.
    pub checkpoints: Vec<f64>,
}

impl RoadMap {
    pub fn from_segments(
        segments: &[Segment],
        lane_count: usize,
        lane_width: f64,
    ) -> Result<Self, SimError> {
        if segments.is_empty() {
            return Err(SimError::Config("a map needs at least one segment".into()));
        }
        if lane_count == 0 || !(lane_width > 0.0) {
            return Err(SimError::Config("lane count and width must be positive".into()));
        }
        let half_width = lane_count as f64 * lane_width / 2.0;
        let mut placed = Vec::with_capacity(segments.len());
        let mut pose = Pose::new(0.0, 0.0, 0.0);
        let mut s0 = 0.0;
        for seg in segments {
            match *seg {
                Segment::Straight { length } if !(length > 0.0) => {
                    return Err(SimError::Config(format!("straight length {length} must be positive")));
                }
                Segment::Arc { radius, sweep } if !(radius > half_width) || sweep == 0.0 || !sweep.is_finite() => {
                    return Err(SimError::Config(format!(
                        "arc radius {radius} must exceed the road half-width {half_width} and sweep must be non-zero"
                    )));
                }
                _ => {}
            }
            let ps = PlacedSegment {
                segment: *seg,
                start: pose,
                s0,
            };
            pose = ps.end();
            s0 += seg.length();
            placed.push(ps);
        }
        let length = s0;
        let mut checkpoints = Vec::new();
        let mut k = 1;
        while (k as f64) * CHECKPOINT_SPACING < length - 1e-9 {
            checkpoints.push(k as f64 * CHECKPOINT_SPACING);
            k += 1;
        }
        checkpoints.push(length);
        Ok(Self {
            segments: placed,
            lane_count,
            lane_width,
            length,
            checkpoints,
        })
    }

    pub fn half_width(&self) -> f64 {
        self.lane_count as f64 * self.lane_width / 2.0
    }

    /// Lateral offset of a lane centre; lane 0 is the leftmost.
    pub fn lane_offset(&self, lane: usize) -> f64 {
        self.half_width() - (lane as f64 + 0.5) * self.lane_width
    }

    /// Index of the lane containing lateral offset `lateral` (clamped).
    pub fn lane_at(&self, lateral: f64) -> usize {
        let idx = ((self.half_width() - lateral) / self.lane_width).floor();
        idx.clamp(0.0, (self.lane_count - 1) as f64) as usize
    }

    fn segment_index(&self, s: f64) -> usize {
        self.segments
            .iter()
            .rposition(|seg| seg.s0 <= s)
            .unwrap_or(0)
    }

    /// Reference-line pose at route arc length `s`; extrapolates linearly
    /// beyond either end.
    pub fn pose_at(&self, s: f64) -> Pose {
        let i = self.segment_index(s);
        let seg = &self.segments[i];
        let local = s - seg.s0;
        if i + 1 < self.segments.len() {
            seg.pose_at(local.min(seg.length()))
        } else {
            seg.pose_at(local)
        }
    }

    /// Pose at arc length `s` shifted `lateral` metres to the left.
    pub fn offset_pose(&self, s: f64, lateral: f64) -> Pose {
        let base = self.pose_at(s);
        let p = base.position() + base.left() * lateral;
        Pose::new(p.x, p.y, base.heading)
    }

    pub fn project(&self, p: Vec2) -> Projection {
        let mut best: Option<(f64, Projection)> = None;
        for seg in &self.segments {
            let (t, lateral, overshoot, heading) = seg.project(p);
            let proj = Projection {
                s: seg.s0 + t,
                lateral,
                overshoot,
                heading,
            };
            let d = proj.distance();
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, proj));
            }
        }
        let (_, mut proj) = best.expect("map has segments");
        // Interior overshoot at a joint is an artefact of the clamped segment
        // choice; only the route ends carry real overshoot.
        if proj.s > 1e-9 && proj.s < self.length - 1e-9 {
            proj.overshoot = 0.0;
        }
        proj
    }

    /// Dense centerline polyline `(s, x, y)` at roughly `spacing` metres.
    pub fn centerline(&self, spacing: f64) -> Vec<(f64, f64, f64)> {
        let n = (self.length / spacing).ceil().max(1.0) as usize;
        (0..=n)
            .map(|i| {
                let s = self.length * i as f64 / n as f64;
                let p = self.pose_at(s);
                (s, p.x, p.y)
            })
            .collect()
    }
}

/// Builds a map from a spec. Fixed specs ignore the seed.
pub fn build_map(
    spec: &MapSpec,
    lane_count: usize,
    lane_width: f64,
    seed: u64,
) -> Result<RoadMap, SimError> {
    match spec {
        MapSpec::Fixed { segments } => RoadMap::from_segments(segments, lane_count, lane_width),
        MapSpec::Random(r) => {
            let segments = random_segments(r, lane_count as f64 * lane_width / 2.0, seed)?;
            RoadMap::from_segments(&segments, lane_count, lane_width)
        }
    }
}

fn random_segments(spec: &RandomMapSpec, half_width: f64, seed: u64) -> Result<Vec<Segment>, SimError> {
    let ranges_ok = spec.min_segments >= 1
        && spec.min_segments <= spec.max_segments
        && spec.straight_length.0 > 0.0
        && spec.straight_length.0 <= spec.straight_length.1
        && spec.arc_radius.0 > half_width
        && spec.arc_radius.0 <= spec.arc_radius.1
        && spec.arc_sweep.0 > 0.0
        && spec.arc_sweep.0 <= spec.arc_sweep.1
        && spec.total_length.0 <= spec.total_length.1;
    if !ranges_ok {
        return Err(SimError::Config(format!("infeasible random map spec: {spec:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uniform = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| {
        if hi > lo {
            rng.random_range(lo..hi)
        } else {
            lo
        }
    };
    for _ in 0..1000 {
        let count = rng.random_range(spec.min_segments..=spec.max_segments);
        let mut segments = Vec::with_capacity(count);
        // The spawn block is always straight.
        segments.push(Segment::Straight {
            length: uniform(&mut rng, spec.straight_length),
        });
        for _ in 1..count {
            let prev_arc = matches!(segments.last(), Some(Segment::Arc { .. }));
            if prev_arc || rng.random_bool(0.5) {
                segments.push(Segment::Straight {
                    length: uniform(&mut rng, spec.straight_length),
                });
            } else {
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                segments.push(Segment::Arc {
                    radius: uniform(&mut rng, spec.arc_radius),
                    sweep: sign * uniform(&mut rng, spec.arc_sweep),
                });
            }
        }
        let total: f64 = segments.iter().map(Segment::length).sum();
        if total >= spec.total_length.0 && total <= spec.total_length.1 {
            return Ok(segments);
        }
    }
    Err(SimError::Config(format!(
        "random map spec never met the total length range {:?}",
        spec.total_length
    )))
}
