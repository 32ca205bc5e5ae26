//! Planar kinematic snake: the head moves as a unicycle whose heading
//! oscillates with the gait, and every other segment trails along the path the
//! head has drawn.

mod scenario;

use std::collections::VecDeque;
use std::f64::consts::FRAC_1_PI;

use serde::{Deserialize, Serialize};

use crate::config::{angle, GaitParams};
use crate::error::{ConfigError, Sim2dError};
use crate::sense::SegmentPose;
use crate::world::{Point, WorldModel};

pub use scenario::{
    run_corridor, run_random_walk, run_target_follow, CorridorMetrics, ScenarioMetrics, ScenarioRun, TrajectoryRow,
};

/// `[sim2d]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sim2dSettings {
    pub dt: f64,
    /// Forward speed is `c_v · A · ω · link_length`.
    pub c_v: f64,
    /// Base heading rate per unit offset, 1/s.
    pub c_upsilon: f64,
    /// Simulation steps per controller decision.
    pub decision_every: usize,
    /// Random-walk probability of drawing a new offset at a decision tick.
    pub p_turn: f64,
    /// Head-sensor distance below which only avoidance steers, m.
    pub d_safe: f64,
    /// Target following pauses while a foremost side sensor reads below this, m.
    pub d_side: f64,
    pub max_steps: usize,
    /// Trajectory sampling interval in steps.
    pub record_every: usize,
    pub start: [f64; 2],
    #[serde(deserialize_with = "angle::de")]
    pub start_heading: f64,
    /// Initial heading is drawn uniformly from `start_heading ± heading_spread`.
    #[serde(deserialize_with = "angle::de")]
    pub heading_spread: f64,
    /// A new obstacle within this many seconds of the last one turns the same way.
    pub relatch_window: f64,
}

impl Default for Sim2dSettings {
    fn default() -> Self {
        Sim2dSettings {
            dt: 0.01,
            c_v: FRAC_1_PI,
            c_upsilon: 1.0,
            decision_every: 10,
            p_turn: 0.05,
            d_safe: 0.5,
            d_side: 0.45,
            max_steps: 60_000,
            record_every: 10,
            start: [0.0, 0.0],
            start_heading: 0.0,
            heading_spread: 0.0,
            relatch_window: 20.0,
        }
    }
}

impl Sim2dSettings {
    pub(crate) fn validate(&self) -> Result<(), ConfigError> {
        if !(self.dt > 0.0 && self.dt <= 0.05) {
            return Err(ConfigError::invalid("sim2d.dt", "must be in (0, 0.05]"));
        }
        for (key, v) in [("sim2d.c_v", self.c_v), ("sim2d.c_upsilon", self.c_upsilon)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(ConfigError::invalid(key, "must be >= 0"));
            }
        }
        if self.decision_every == 0 {
            return Err(ConfigError::invalid("sim2d.decision_every", "must be >= 1"));
        }
        if self.record_every == 0 {
            return Err(ConfigError::invalid("sim2d.record_every", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.p_turn) {
            return Err(ConfigError::invalid("sim2d.p_turn", "must be in [0, 1]"));
        }
        if !(self.d_safe >= 0.0) {
            return Err(ConfigError::invalid("sim2d.d_safe", "must be >= 0"));
        }
        if !(self.d_side >= 0.0) {
            return Err(ConfigError::invalid("sim2d.d_side", "must be >= 0"));
        }
        if self.max_steps == 0 {
            return Err(ConfigError::invalid("sim2d.max_steps", "must be >= 1"));
        }
        if !(self.heading_spread >= 0.0) || !self.start_heading.is_finite() {
            return Err(ConfigError::invalid("sim2d.heading_spread", "must be >= 0"));
        }
        if !(self.relatch_window >= 0.0) {
            return Err(ConfigError::invalid("sim2d.relatch_window", "must be >= 0"));
        }
        Ok(())
    }
}

/// Body state of the planar model.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyPose2D {
    /// Segment centres and headings, head first.
    pub segments: Vec<SegmentPose>,
    /// Mean heading the gait oscillates around.
    pub theta_base: f64,
    /// Accumulated gait phase `∫ω dt`.
    pub phase: f64,
    pub t: f64,
    pub link_length: f64,
    /// Head path, newest point first. Always reaches past the tail.
    path: VecDeque<Point>,
}

impl BodyPose2D {
    /// Straight body of `n` segments with the head at `head`, pointing along
    /// `heading`.
    pub fn straight(n: usize, link_length: f64, head: Point, heading: f64) -> Self {
        let dir = Point::new(heading.cos(), heading.sin());
        let path: VecDeque<Point> = (0..=n).map(|k| head - dir * (k as f64 * link_length)).collect();
        let mut body = BodyPose2D {
            segments: Vec::with_capacity(n),
            theta_base: heading,
            phase: 0.0,
            t: 0.0,
            link_length,
            path,
        };
        body.segments = vec![SegmentPose { position: head, heading }; n];
        body.place_body();
        body
    }

    pub fn head(&self) -> Point {
        self.segments[0].position
    }

    pub fn head_heading(&self) -> f64 {
        self.segments[0].heading
    }

    /// Number of stored head-path vertices.
    pub fn path_len(&self) -> usize {
        self.path.len()
    }

    /// Moves the head one step without re-placing the body. Returns the head
    /// displacement applied before any collision correction.
    fn advance_head(&mut self, h: &GaitParams, upsilon: f64, dt: f64, s: &Sim2dSettings) -> Point {
        self.theta_base += s.c_upsilon * upsilon * dt;
        self.phase += h.omega * dt;
        self.t += dt;
        let heading = self.theta_base + h.amplitude * self.phase.sin();
        let speed = s.c_v * h.amplitude * h.omega * self.link_length;
        let delta = Point::new(heading.cos(), heading.sin()) * (speed * dt);
        let head = &mut self.segments[0];
        head.heading = heading;
        head.position += delta;
        delta
    }

    /// Replaces the head position, e.g. after collision correction, and
    /// extends the path to it.
    fn commit_head(&mut self, head: Point) {
        self.segments[0].position = head;
        if self.path.front().is_some_and(|&p| p == head) {
            return;
        }
        self.path.push_front(head);
    }

    /// Places segments 1.. on the head path at chord distance `link_length`
    /// from their predecessor, then trims path vertices the tail has passed.
    fn place_body(&mut self) {
        let l = self.link_length;
        let l2 = l * l;
        let mut edge = 0usize;
        let mut s_min = 0.0f64;
        for i in 1..self.segments.len() {
            let prev = self.segments[i - 1].position;
            let placed = loop {
                if edge + 1 >= self.path.len() {
                    self.extend_path();
                }
                let p0 = self.path[edge];
                let e = self.path[edge + 1] - p0;
                let a = p0 - prev;
                let ee = e.norm_squared();
                if ee > 0.0 {
                    let ae = a.dot(&e);
                    let disc = ae * ae - ee * (a.norm_squared() - l2);
                    if disc >= 0.0 {
                        let s = (-ae + disc.sqrt()) / ee;
                        if s >= s_min && s <= 1.0 {
                            s_min = s;
                            break p0 + e * s;
                        }
                    }
                }
                edge += 1;
                s_min = 0.0;
            };
            let d = prev - placed;
            // exact chord length despite rounding in the root
            let placed = prev - d * (l / d.norm());
            self.segments[i] = SegmentPose { position: placed, heading: d.y.atan2(d.x) };
        }
        self.path.truncate(edge + 2);
    }

    fn extend_path(&mut self) {
        let n = self.path.len();
        let last = self.path[n - 1];
        let dir = if n >= 2 {
            let d = last - self.path[n - 2];
            let len = d.norm();
            if len > 0.0 {
                d / len
            } else {
                Point::new(-self.theta_base.cos(), -self.theta_base.sin())
            }
        } else {
            Point::new(-self.theta_base.cos(), -self.theta_base.sin())
        };
        self.path.push_back(last + dir * self.link_length);
    }

    /// Full step: head motion, optional collision correction of the head
    /// disc, body placement. Returns the head travel and whether the head
    /// penetrated an obstacle.
    fn step_in(
        &mut self,
        h: &GaitParams,
        upsilon: f64,
        dt: f64,
        s: &Sim2dSettings,
        world: Option<(&WorldModel, f64)>,
        place: bool,
    ) -> (f64, bool) {
        let before = self.head();
        self.advance_head(h, upsilon, dt, s);
        let mut head = self.head();
        let mut hit = false;
        if let Some((w, r)) = world {
            (head, hit) = w.resolve_penetration(head, r);
        }
        self.commit_head(head);
        if place {
            self.place_body();
        }
        ((head - before).norm(), hit)
    }
}

/// One kinematic step with no obstacles.
pub fn step(
    state: &BodyPose2D,
    h: &GaitParams,
    upsilon: f64,
    dt: f64,
    s: &Sim2dSettings,
) -> Result<BodyPose2D, Sim2dError> {
    if !(dt > 0.0 && dt <= 0.05) {
        return Err(Sim2dError::TimeStep(dt));
    }
    let mut next = state.clone();
    next.step_in(h, upsilon, dt, s, None, true);
    Ok(next)
}
