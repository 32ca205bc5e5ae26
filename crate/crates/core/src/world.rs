//! Planar arena: wall segments, axis-aligned blocks, a target disc and the
//! enclosing bounds. The bounds act as walls for sensing and collision.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

pub type Point = Vector2<f64>;

pub fn pt(p: [f64; 2]) -> Point {
    Point::new(p[0], p[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: [f64; 2],
    pub b: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Aabb {
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Self {
        Aabb { min, max }
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min[0] && p.x <= self.max[0] && p.y >= self.min[1] && p.y <= self.max[1]
    }

    fn contains_box(&self, other: &Aabb) -> bool {
        self.contains(pt(other.min)) && self.contains(pt(other.max))
    }

    pub fn closest_point(&self, p: Point) -> Point {
        Point::new(
            p.x.clamp(self.min[0], self.max[0]),
            p.y.clamp(self.min[1], self.max[1]),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Target {
    pub fn contains(&self, p: Point) -> bool {
        (p - pt(self.center)).norm() <= self.radius
    }
}

/// Arena description. Serialized as the `[world]` table of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldModel {
    /// `[xmin, ymin, xmax, ymax]`.
    pub bounds: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Target>,
    #[serde(default, rename = "segment", skip_serializing_if = "Vec::is_empty")]
    pub segments: Vec<Segment>,
    #[serde(default, rename = "box", skip_serializing_if = "Vec::is_empty")]
    pub boxes: Vec<Aabb>,
}

impl Default for WorldModel {
    fn default() -> Self {
        WorldModel {
            bounds: [-5.0, -5.0, 5.0, 5.0],
            target: None,
            segments: Vec::new(),
            boxes: Vec::new(),
        }
    }
}

impl WorldModel {
    pub fn empty(bounds: [f64; 4]) -> Self {
        WorldModel {
            bounds,
            ..Default::default()
        }
    }

    /// Straight corridor along +x, centred on y = 0.
    pub fn corridor(width: f64, x_min: f64, x_max: f64) -> Self {
        let h = width / 2.0;
        WorldModel {
            bounds: [x_min, -h - 1.0, x_max, h + 1.0],
            target: None,
            segments: vec![
                Segment { a: [x_min, h], b: [x_max, h] },
                Segment { a: [x_min, -h], b: [x_max, -h] },
            ],
            boxes: Vec::new(),
        }
    }

    pub fn bounds_box(&self) -> Aabb {
        Aabb::new([self.bounds[0], self.bounds[1]], [self.bounds[2], self.bounds[3]])
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let b = self.bounds;
        if !b.iter().all(|v| v.is_finite()) || b[0] >= b[2] || b[1] >= b[3] {
            return Err(ConfigError::invalid("world.bounds", "need xmin < xmax and ymin < ymax"));
        }
        let bounds = self.bounds_box();
        for (i, s) in self.segments.iter().enumerate() {
            if !bounds.contains(pt(s.a)) || !bounds.contains(pt(s.b)) {
                return Err(ConfigError::invalid(
                    format!("world.segment[{i}]"),
                    "segment leaves the world bounds",
                ));
            }
        }
        for (i, bx) in self.boxes.iter().enumerate() {
            if bx.min[0] >= bx.max[0] || bx.min[1] >= bx.max[1] {
                return Err(ConfigError::invalid(format!("world.box[{i}]"), "min must be below max"));
            }
            if !bounds.contains_box(bx) {
                return Err(ConfigError::invalid(
                    format!("world.box[{i}]"),
                    "box leaves the world bounds",
                ));
            }
        }
        if let Some(t) = &self.target {
            if !(t.radius > 0.0) {
                return Err(ConfigError::invalid("world.target.radius", "must be positive"));
            }
            let c = pt(t.center);
            if !bounds.contains(c) {
                return Err(ConfigError::invalid("world.target.center", "outside world bounds"));
            }
            if self.clearance(c) <= t.radius {
                return Err(ConfigError::invalid("world.target", "target disc touches an obstacle"));
            }
        }
        Ok(())
    }

    /// Distance from `p` to the nearest obstacle (segments and boxes, not bounds).
    /// Zero inside a box.
    pub fn clearance(&self, p: Point) -> f64 {
        let seg = self
            .segments
            .iter()
            .map(|s| (p - closest_on_segment(p, pt(s.a), pt(s.b))).norm());
        let boxes = self.boxes.iter().map(|b| (p - b.closest_point(p)).norm());
        seg.chain(boxes).fold(f64::INFINITY, f64::min)
    }

    /// Pushes a disc of radius `r` centred at `p` out of every obstacle and back
    /// inside the bounds. Returns the corrected centre and whether it penetrated.
    pub fn resolve_penetration(&self, p: Point, r: f64) -> (Point, bool) {
        let mut q = p;
        let mut hit = false;
        // a couple of sweeps settle corners where two obstacles meet
        for _ in 0..3 {
            let mut moved = false;
            for s in &self.segments {
                let c = closest_on_segment(q, pt(s.a), pt(s.b));
                let d = q - c;
                let dist = d.norm();
                if dist < r {
                    let n = if dist > 1e-12 { d / dist } else { segment_normal(pt(s.a), pt(s.b)) };
                    q = c + n * r;
                    moved = true;
                }
            }
            for b in &self.boxes {
                let inside = b.contains(q);
                let c = b.closest_point(q);
                let dist = (q - c).norm();
                if inside {
                    // leave through the nearest face
                    let faces = [
                        (q.x - b.min[0], Point::new(-1.0, 0.0)),
                        (b.max[0] - q.x, Point::new(1.0, 0.0)),
                        (q.y - b.min[1], Point::new(0.0, -1.0)),
                        (b.max[1] - q.y, Point::new(0.0, 1.0)),
                    ];
                    let (depth, n) = faces
                        .iter()
                        .copied()
                        .fold((f64::INFINITY, Point::zeros()), |acc, f| if f.0 < acc.0 { f } else { acc });
                    q += n * (depth + r);
                    moved = true;
                } else if dist < r {
                    q = c + (q - c) / dist * r;
                    moved = true;
                }
            }
            let lo = [self.bounds[0] + r, self.bounds[1] + r];
            let hi = [self.bounds[2] - r, self.bounds[3] - r];
            let clamped = Point::new(q.x.clamp(lo[0], hi[0]), q.y.clamp(lo[1], hi[1]));
            if clamped != q {
                q = clamped;
                moved = true;
            }
            hit |= moved;
            if !moved {
                break;
            }
        }
        (q, hit)
    }
}

pub fn closest_on_segment(p: Point, a: Point, b: Point) -> Point {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return a;
    }
    let s = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    a + ab * s
}

fn segment_normal(a: Point, b: Point) -> Point {
    let d = b - a;
    let n = Point::new(-d.y, d.x);
    let len = n.norm();
    if len > 0.0 {
        n / len
    } else {
        Point::new(1.0, 0.0)
    }
}

/// Wraps an angle to (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut w = a.rem_euclid(TAU);
    if w > PI {
        w -= TAU;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_angle(0.0), 0.0);
    }

    #[test]
    fn target_touching_obstacle_rejected() {
        let mut w = WorldModel::empty([-2.0, -2.0, 2.0, 2.0]);
        w.segments.push(Segment { a: [0.0, -1.0], b: [0.0, 1.0] });
        w.target = Some(Target { center: [0.1, 0.0], radius: 0.2 });
        assert_eq!(w.validate().unwrap_err().key(), Some("world.target"));
        w.target = Some(Target { center: [0.5, 0.0], radius: 0.2 });
        w.validate().unwrap();
    }

    #[test]
    fn obstacle_outside_bounds_rejected() {
        let mut w = WorldModel::empty([-1.0, -1.0, 1.0, 1.0]);
        w.boxes.push(Aabb::new([0.5, 0.5], [1.5, 0.8]));
        assert_eq!(w.validate().unwrap_err().key(), Some("world.box[0]"));
    }

    #[test]
    fn penetration_pushes_out_along_normal() {
        let mut w = WorldModel::empty([-2.0, -2.0, 2.0, 2.0]);
        w.segments.push(Segment { a: [-1.0, 0.0], b: [1.0, 0.0] });
        let (q, hit) = w.resolve_penetration(Point::new(0.3, 0.01), 0.05);
        assert!(hit);
        assert!((q - Point::new(0.3, 0.05)).norm() < 1e-12);
        let (q, hit) = w.resolve_penetration(Point::new(0.3, 0.5), 0.05);
        assert!(!hit);
        assert_eq!(q, Point::new(0.3, 0.5));
    }

    #[test]
    fn box_interior_exits_nearest_face() {
        let mut w = WorldModel::empty([-2.0, -2.0, 2.0, 2.0]);
        w.boxes.push(Aabb::new([0.0, 0.0], [1.0, 1.0]));
        let (q, hit) = w.resolve_penetration(Point::new(0.9, 0.5), 0.05);
        assert!(hit);
        assert!((q - Point::new(1.05, 0.5)).norm() < 1e-12);
    }
}
