//! Simulated range sensors and compass over a [`WorldModel`].
//!
//! Every sensor is a single ray: IR and sonar differ only in range. Readings
//! are noiseless unless noise is requested explicitly.

use nalgebra::Rotation2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::{angle, SnakeConfig};
use crate::error::{ConfigError, SenseError};
use crate::world::{pt, wrap_angle, Aabb, Point, WorldModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorKind {
    Ir,
    Sonar,
}

/// What the controller uses a sensor for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorRole {
    Head,
    Side,
    Tail,
    Sonar,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorMount {
    /// Segment index, 0 = head.
    pub segment: usize,
    /// Ray direction relative to the segment heading (left is positive).
    #[serde(deserialize_with = "angle::de")]
    pub angle: f64,
    pub range: f64,
    pub kind: SensorKind,
    pub role: SensorRole,
    /// Distance from the segment centre to the ray origin, along the ray.
    #[serde(default)]
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorLayout {
    pub mounts: Vec<SensorMount>,
}

impl SensorLayout {
    /// Head IR forward, 13 side IRs alternating left/right along the body, tail
    /// IR backward and a forward sonar: 15 IR sensors and one sonar in total.
    pub fn default_for(snake: &SnakeConfig, ir_range: f64, sonar_range: f64) -> Self {
        use std::f64::consts::{FRAC_PI_2, PI};
        let n = snake.n_links;
        let half_len = snake.link_length / 2.0;
        let mut mounts = vec![SensorMount {
            segment: 0,
            angle: 0.0,
            range: ir_range,
            kind: SensorKind::Ir,
            role: SensorRole::Head,
            offset: half_len,
        }];
        let first = 1.min(n - 1);
        let last = n.saturating_sub(2).max(first);
        for k in 0..13 {
            let seg = first + ((k * (last - first)) as f64 / 12.0).round() as usize;
            mounts.push(SensorMount {
                segment: seg,
                angle: if k % 2 == 0 { FRAC_PI_2 } else { -FRAC_PI_2 },
                range: ir_range,
                kind: SensorKind::Ir,
                role: SensorRole::Side,
                offset: snake.body_half_width,
            });
        }
        mounts.push(SensorMount {
            segment: n - 1,
            angle: PI,
            range: ir_range,
            kind: SensorKind::Ir,
            role: SensorRole::Tail,
            offset: half_len,
        });
        mounts.push(SensorMount {
            segment: 0,
            angle: 0.0,
            range: sonar_range,
            kind: SensorKind::Sonar,
            role: SensorRole::Sonar,
            offset: half_len,
        });
        SensorLayout { mounts }
    }

    pub fn count(&self, kind: SensorKind) -> usize {
        self.mounts.iter().filter(|m| m.kind == kind).count()
    }

    pub fn first(&self, role: SensorRole) -> Option<usize> {
        self.mounts.iter().position(|m| m.role == role)
    }

    pub fn indices(&self, role: SensorRole) -> impl Iterator<Item = usize> + '_ {
        self.mounts
            .iter()
            .enumerate()
            .filter(move |(_, m)| m.role == role)
            .map(|(i, _)| i)
    }
}

/// `[snake.sensors]` table. An empty `mount` list selects the default layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSettings {
    /// IR range, m.
    pub ir_range: f64,
    pub sonar_range: f64,
    /// Half-width of additive uniform noise, m. Zero disables noise.
    pub noise: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub mount: Vec<SensorMount>,
}

impl Default for SensorSettings {
    fn default() -> Self {
        SensorSettings {
            ir_range: 1.5,
            sonar_range: 3.0,
            noise: 0.0,
            mount: Vec::new(),
        }
    }
}

impl SensorSettings {
    pub fn layout(&self, snake: &SnakeConfig) -> SensorLayout {
        if self.mount.is_empty() {
            SensorLayout::default_for(snake, self.ir_range, self.sonar_range)
        } else {
            SensorLayout { mounts: self.mount.clone() }
        }
    }

    pub(crate) fn validate(&self, n_links: usize) -> Result<(), ConfigError> {
        if !(self.ir_range > 0.0) || !self.ir_range.is_finite() {
            return Err(ConfigError::invalid("snake.sensors.ir_range", "must be positive"));
        }
        if !(self.sonar_range > 0.0) || !self.sonar_range.is_finite() {
            return Err(ConfigError::invalid("snake.sensors.sonar_range", "must be positive"));
        }
        if !(self.noise >= 0.0) {
            return Err(ConfigError::invalid("snake.sensors.noise", "must be >= 0"));
        }
        for (i, m) in self.mount.iter().enumerate() {
            if m.segment >= n_links {
                return Err(ConfigError::invalid(
                    format!("snake.sensors.mount[{i}].segment"),
                    "beyond the last segment",
                ));
            }
            if !(m.range > 0.0) {
                return Err(ConfigError::invalid(
                    format!("snake.sensors.mount[{i}].range"),
                    "must be positive",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentPose {
    pub position: Point,
    pub heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorReading {
    pub sensor: usize,
    /// Distance to the first hit, or the sensor range when nothing is hit.
    pub d: f64,
    pub t: f64,
}

fn cross(a: Point, b: Point) -> f64 {
    a.x * b.y - a.y * b.x
}

fn ray_segment(o: Point, d: Point, a: Point, b: Point) -> Option<f64> {
    let e = b - a;
    let ao = a - o;
    let denom = cross(d, e);
    let scale = e.norm().max(1.0);
    if denom.abs() <= 1e-14 * scale {
        // parallel: only a collinear overlap can be hit
        if cross(ao, d).abs() > 1e-12 * scale {
            return None;
        }
        let ta = ao.dot(&d);
        let tb = (b - o).dot(&d);
        let (lo, hi) = if ta < tb { (ta, tb) } else { (tb, ta) };
        return if hi < 0.0 {
            None
        } else {
            Some(lo.max(0.0))
        };
    }
    let t = cross(ao, e) / denom;
    let s = cross(ao, d) / denom;
    (t >= 0.0 && (0.0..=1.0).contains(&s)).then_some(t)
}

fn ray_box(o: Point, d: Point, b: &Aabb) -> Option<f64> {
    let mut t_lo = f64::NEG_INFINITY;
    let mut t_hi = f64::INFINITY;
    for axis in 0..2 {
        let (lo, hi) = (b.min[axis], b.max[axis]);
        if d[axis] == 0.0 {
            if o[axis] < lo || o[axis] > hi {
                return None;
            }
        } else {
            let t1 = (lo - o[axis]) / d[axis];
            let t2 = (hi - o[axis]) / d[axis];
            let (a, c) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            t_lo = t_lo.max(a);
            t_hi = t_hi.min(c);
        }
    }
    if t_hi < t_lo || t_hi < 0.0 {
        None
    } else {
        Some(t_lo.max(0.0))
    }
}

fn ray_exit_bounds(o: Point, d: Point, b: &Aabb) -> f64 {
    let mut t = f64::INFINITY;
    for axis in 0..2 {
        if d[axis] > 0.0 {
            t = t.min((b.max[axis] - o[axis]) / d[axis]);
        } else if d[axis] < 0.0 {
            t = t.min((b.min[axis] - o[axis]) / d[axis]);
        }
    }
    t.max(0.0)
}

/// Distance along the ray to the nearest obstacle or bounds wall, capped at
/// `max_range`. Non-unit directions are normalized.
pub fn raycast(world: &WorldModel, origin: Point, direction: Point, max_range: f64) -> Result<f64, SenseError> {
    let len = direction.norm();
    if !(len > 0.0) || !len.is_finite() {
        return Err(SenseError::ZeroDirection);
    }
    if !(max_range > 0.0) {
        return Err(SenseError::BadRange);
    }
    let d = direction / len;
    let mut best = ray_exit_bounds(origin, d, &world.bounds_box()).min(max_range);
    for s in &world.segments {
        if let Some(t) = ray_segment(origin, d, pt(s.a), pt(s.b)) {
            best = best.min(t);
        }
    }
    for b in &world.boxes {
        if let Some(t) = ray_box(origin, d, b) {
            best = best.min(t);
        }
    }
    Ok(best)
}

fn mount_ray(pose: &SegmentPose, m: &SensorMount) -> (Point, Point) {
    let dir = Rotation2::new(pose.heading + m.angle) * Point::new(1.0, 0.0);
    (pose.position + dir * m.offset, dir)
}

/// One noiseless reading per mounted sensor.
pub fn read_all(world: &WorldModel, body: &[SegmentPose], layout: &SensorLayout, t: f64) -> Vec<SensorReading> {
    layout
        .mounts
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let (o, d) = mount_ray(&body[m.segment], m);
            let dist = raycast(world, o, d, m.range).expect("mount rays are unit length");
            SensorReading { sensor: i, d: dist, t }
        })
        .collect()
}

/// [`read_all`] plus additive uniform noise in `[−noise, noise]`, clamped to
/// each sensor's range.
pub fn read_all_noisy<R: Rng>(
    world: &WorldModel,
    body: &[SegmentPose],
    layout: &SensorLayout,
    t: f64,
    noise: f64,
    rng: &mut R,
) -> Vec<SensorReading> {
    let mut out = read_all(world, body, layout, t);
    if noise > 0.0 {
        for r in &mut out {
            let range = layout.mounts[r.sensor].range;
            r.d = (r.d + rng.random_range(-noise..=noise)).clamp(0.0, range);
        }
    }
    out
}

/// Heading of the head segment in (−π, π]; 0 is +x, π/2 is +y.
pub fn compass(head: &SegmentPose) -> f64 {
    wrap_angle(head.heading)
}
