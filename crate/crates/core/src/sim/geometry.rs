//! Small planar geometry kit: vectors, poses and ray casts.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub const fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn forward(&self) -> Vec2 {
        Vec2::from_angle(self.heading)
    }

    pub fn left(&self) -> Vec2 {
        Vec2::new(-self.heading.sin(), self.heading.cos())
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    r
}

/// Distance along the unit ray `origin + t dir` to a disc, 0 if the origin
/// is inside it.
pub fn ray_circle(origin: Vec2, dir: Vec2, centre: Vec2, radius: f64) -> Option<f64> {
    let w = origin - centre;
    let c = w.dot(w) - radius * radius;
    if c <= 0.0 {
        return Some(0.0);
    }
    let b = w.dot(dir);
    let disc = b * b - c;
    if disc < 0.0 || b > 0.0 {
        return None;
    }
    Some(-b - disc.sqrt())
}

/// Both non-negative hits of a ray with a circle outline, nearest first.
pub fn ray_circle_outline(origin: Vec2, dir: Vec2, centre: Vec2, radius: f64) -> [Option<f64>; 2] {
    let w = origin - centre;
    let b = w.dot(dir);
    let c = w.dot(w) - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return [None, None];
    }
    let sq = disc.sqrt();
    let keep = |t: f64| (t >= 0.0).then_some(t);
    [keep(-b - sq), keep(-b + sq)]
}

/// Hit distance of a unit ray with the segment `a`-`b`.
pub fn ray_segment(origin: Vec2, dir: Vec2, a: Vec2, b: Vec2) -> Option<f64> {
    let e = b - a;
    let denom = dir.cross(e);
    if denom.abs() < 1e-12 {
        return None;
    }
    let w = a - origin;
    let t = w.cross(e) / denom;
    let u = w.cross(dir) / denom;
    (t >= 0.0 && (0.0..=1.0).contains(&u)).then_some(t)
}

/// Hit distance of a unit ray with an oriented rectangle, 0 if inside.
pub fn ray_box(origin: Vec2, dir: Vec2, pose: Pose, half_length: f64, half_width: f64) -> Option<f64> {
    let f = pose.forward();
    let l = pose.left();
    let w = origin - pose.position();
    let o = [w.dot(f), w.dot(l)];
    let d = [dir.dot(f), dir.dot(l)];
    let h = [half_length, half_width];
    let mut t_min = f64::NEG_INFINITY;
    let mut t_max = f64::INFINITY;
    for k in 0..2 {
        if d[k].abs() < 1e-15 {
            if o[k].abs() > h[k] {
                return None;
            }
        } else {
            let t1 = (-h[k] - o[k]) / d[k];
            let t2 = (h[k] - o[k]) / d[k];
            t_min = t_min.max(t1.min(t2));
            t_max = t_max.min(t1.max(t2));
        }
    }
    if t_max < t_min || t_max < 0.0 {
        return None;
    }
    Some(t_min.max(0.0))
}

/// Distance from a point to an oriented rectangle (0 inside).
pub fn point_box_distance(p: Vec2, pose: Pose, half_length: f64, half_width: f64) -> f64 {
    let w = p - pose.position();
    let dx = (w.dot(pose.forward()).abs() - half_length).max(0.0);
    let dy = (w.dot(pose.left()).abs() - half_width).max(0.0);
    dx.hypot(dy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap() {
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-15);
        assert!((wrap_angle(TAU + 0.25) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn circle_hits() {
        let t = ray_circle(Vec2::default(), Vec2::new(1.0, 0.0), Vec2::new(10.0, 0.0), 1.0);
        assert!((t.unwrap() - 9.0).abs() < 1e-12);
        assert_eq!(ray_circle(Vec2::default(), Vec2::new(-1.0, 0.0), Vec2::new(10.0, 0.0), 1.0), None);
        assert_eq!(ray_circle(Vec2::new(10.5, 0.0), Vec2::new(1.0, 0.0), Vec2::new(10.0, 0.0), 1.0), Some(0.0));
    }

    #[test]
    fn box_hits() {
        let pose = Pose::new(10.0, 0.0, 0.3);
        let t = ray_box(Vec2::default(), Vec2::new(1.0, 0.0), Pose::new(10.0, 0.0, 0.0), 2.0, 1.0);
        assert!((t.unwrap() - 8.0).abs() < 1e-12);
        assert!(ray_box(Vec2::default(), Vec2::new(0.0, 1.0), pose, 2.0, 1.0).is_none());
        assert_eq!(point_box_distance(Vec2::new(10.0, 3.0), Pose::new(10.0, 0.0, 0.0), 2.0, 1.0), 2.0);
    }

    #[test]
    fn segment_hits() {
        let t = ray_segment(Vec2::default(), Vec2::new(0.0, 1.0), Vec2::new(-5.0, 4.0), Vec2::new(5.0, 4.0));
        assert!((t.unwrap() - 4.0).abs() < 1e-12);
        assert!(ray_segment(Vec2::default(), Vec2::new(0.0, -1.0), Vec2::new(-5.0, 4.0), Vec2::new(5.0, 4.0)).is_none());
    }
}
