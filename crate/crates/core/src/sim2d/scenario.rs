//! Random-walk, target-following and corridor runs with their metrics.

use std::collections::VecDeque;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};

use crate::adapt::{clamp_offset, combine, phase_sign_of, shaped_amplitude, steering_offset, target_heading_offset};
use crate::config::{Config, GaitParams, SnakeConfig};
use crate::error::ConfigError;
use crate::gait::joint_targets_shaped;
use crate::rng::{RunSeed, Stream};
use crate::sense::{compass, read_all_noisy, SensorLayout, SensorRole};
use crate::world::{pt, WorldModel};

use super::{BodyPose2D, Sim2dSettings};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub seg: usize,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

fn finite_or_null<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

/// Per-run summary. `time_to_target` is infinite when the budget ran out; it
/// is written as `null` in JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScenarioMetrics {
    #[serde(serialize_with = "finite_or_null")]
    pub time_to_target: f64,
    pub path_length: f64,
    pub collisions: u64,
    pub heading_change_total: f64,
    pub energy_proxy: f64,
}

impl ScenarioMetrics {
    pub fn reached(&self) -> bool {
        self.time_to_target.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorridorMetrics {
    #[serde(flatten)]
    pub base: ScenarioMetrics,
    pub max_lateral_extent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun<M> {
    pub trajectory: Vec<TrajectoryRow>,
    /// Offset applied after each decision tick.
    pub offsets: Vec<f64>,
    pub metrics: M,
}

enum Policy {
    RandomWalk,
    TargetFollow,
    Corridor,
}

/// Turn direction for obstacle avoidance, chosen from the gait phase when an
/// obstacle first appears and kept while obstacles keep reappearing.
struct AvoidLatch {
    sign: f64,
    last_seen: f64,
    window: f64,
}

impl AvoidLatch {
    fn new(window: f64) -> Self {
        AvoidLatch { sign: 0.0, last_seen: f64::NEG_INFINITY, window }
    }

    fn sign(&mut self, t: f64, phase: f64) -> f64 {
        if self.sign == 0.0 || t - self.last_seen > self.window {
            self.sign = phase_sign_of(phase.sin());
        }
        self.last_seen = t;
        self.sign
    }
}

struct Run<'a> {
    cfg: &'a Config,
    world: &'a WorldModel,
    layout: SensorLayout,
    body: BodyPose2D,
    policy_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    trajectory: Vec<TrajectoryRow>,
    offsets: Vec<f64>,
    metrics: ScenarioMetrics,
    max_lateral: f64,
}

impl<'a> Run<'a> {
    fn new(cfg: &'a Config, world: &'a WorldModel, seed: u64) -> Self {
        let s = &cfg.sim2d;
        let seed = RunSeed(seed);
        let mut init = seed.rng(Stream::Init);
        let jitter = if s.heading_spread > 0.0 {
            init.random_range(-s.heading_spread..=s.heading_spread)
        } else {
            0.0
        };
        let body = BodyPose2D::straight(
            cfg.snake.n_links,
            cfg.snake.link_length,
            pt(s.start),
            s.start_heading + jitter,
        );
        Run {
            cfg,
            world,
            layout: cfg.snake.sensor_layout(),
            body,
            policy_rng: seed.rng(Stream::Policy),
            noise_rng: seed.rng(Stream::Noise),
            trajectory: Vec::new(),
            offsets: Vec::new(),
            metrics: ScenarioMetrics {
                time_to_target: f64::INFINITY,
                path_length: 0.0,
                collisions: 0,
                heading_change_total: 0.0,
                energy_proxy: 0.0,
            },
            max_lateral: 0.0,
        }
    }

    fn record(&mut self) {
        let t = self.body.t;
        for (i, seg) in self.body.segments.iter().enumerate() {
            self.trajectory.push(TrajectoryRow {
                t,
                seg: i,
                x: seg.position.x,
                y: seg.position.y,
                theta: seg.heading,
            });
        }
        let (lo, hi) = self
            .body
            .segments
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                (lo.min(s.position.y), hi.max(s.position.y))
            });
        self.max_lateral = self.max_lateral.max(hi - lo);
    }

    fn sense(&mut self) -> Vec<f64> {
        let noise = self.cfg.snake.sensors.noise;
        read_all_noisy(self.world, &self.body.segments, &self.layout, self.body.t, noise, &mut self.noise_rng)
            .into_iter()
            .map(|r| r.d)
            .collect()
    }

    fn execute(mut self, policy: Policy) -> Self {
        let cfg = self.cfg;
        let s: &Sim2dSettings = &cfg.sim2d;
        let snake: &SnakeConfig = &cfg.snake;
        let sp = &cfg.steering;
        let base = cfg.gait.horizontal;
        let head_ir = self.layout.first(SensorRole::Head);
        let side: Vec<usize> = self.layout.indices(SensorRole::Side).collect();
        // foremost side sensor on each flank
        let front: Vec<usize> = [true, false]
            .into_iter()
            .filter_map(|left| {
                side.iter()
                    .copied()
                    .filter(|&i| (self.layout.mounts[i].angle > 0.0) == left)
                    .min_by_key(|&i| self.layout.mounts[i].segment)
            })
            .collect();
        let target = self.world.target;
        let radius = snake.body_half_width;
        let per_period = ((base.period() / (s.dt * s.decision_every as f64)).round() as usize).max(1);

        let mut latch = AvoidLatch::new(s.relatch_window);
        let mut upsilon = 0.0f64;
        let mut held = 0.0f64;
        let mut amplitude = base.amplitude;
        let mut joint_amps: Option<Vec<f64>> = None;
        let mut last_cmd: Option<Vec<f64>> = None;
        let mut compass_hist: Vec<f64> = Vec::with_capacity(per_period);
        // the head ray sweeps with the gait; avoidance uses the nearest
        // reading over the last period so it does not flicker
        let mut head_hist: VecDeque<f64> = VecDeque::with_capacity(per_period);

        self.record();
        for k in 0..s.max_steps {
            if k % s.decision_every == 0 {
                if k > 0 {
                    self.body.place_body();
                }
                let readings = self.sense();
                head_hist.push_back(head_ir.map_or(f64::INFINITY, |i| readings[i]));
                if head_hist.len() > per_period {
                    head_hist.pop_front();
                }
                let d_head = head_hist.iter().copied().fold(f64::INFINITY, f64::min);
                let d_range = head_ir.map_or(f64::INFINITY, |i| self.layout.mounts[i].range);
                let t = self.body.t;
                let wanted = match policy {
                    Policy::RandomWalk => {
                        if d_head < s.d_safe {
                            steering_offset(d_head, latch.sign(t, self.body.phase), sp).expect("distance >= 0")
                        } else {
                            if self.policy_rng.random_bool(s.p_turn) {
                                held = self.policy_rng.random_range(-sp.f0..=sp.f0);
                            }
                            held
                        }
                    }
                    Policy::TargetFollow => {
                        compass_hist.push(compass(&self.body.segments[0]));
                        if compass_hist.len() > per_period {
                            compass_hist.remove(0);
                        }
                        let (sx, sy) = compass_hist
                            .iter()
                            .fold((0.0, 0.0), |(x, y), a| (x + a.cos(), y + a.sin()));
                        let heading = sy.atan2(sx);
                        let goal = pt(target.expect("target world checked").center) - self.body.head();
                        let tgt = target_heading_offset(heading, goal.y.atan2(goal.x), sp);
                        let obs = if d_head < d_range {
                            steering_offset(d_head, latch.sign(t, self.body.phase), sp).expect("distance >= 0")
                        } else {
                            0.0
                        };
                        // a wall alongside the neck also holds off the target pull
                        let beside = front.iter().any(|&i| readings[i] < s.d_side);
                        let d_gate = if beside { 0.0 } else { d_head };
                        combine(obs, tgt, d_gate, s.d_safe, amplitude, snake.joint_limit)
                    }
                    Policy::Corridor => {
                        let amps = self.corridor_amplitudes(&readings, &side);
                        amplitude = amps.iter().sum::<f64>() / amps.len().max(1) as f64;
                        joint_amps = Some(amps);
                        0.0
                    }
                };
                let step = (wanted - upsilon).clamp(-sp.f0, sp.f0);
                upsilon = clamp_offset(upsilon + step, amplitude, snake.joint_limit);
                self.offsets.push(upsilon);

                let h = GaitParams { amplitude, offset: upsilon, ..base };
                let cmds: Vec<f64> = joint_targets_shaped(snake, &h, &cfg.gait.vertical, t, joint_amps.as_deref())
                    .iter()
                    .map(|c| c.angle)
                    .collect();
                if let Some(prev) = &last_cmd {
                    self.metrics.energy_proxy += prev.iter().zip(&cmds).map(|(a, b)| (a - b).abs()).sum::<f64>();
                }
                last_cmd = Some(cmds);
            }

            let h = GaitParams { amplitude, ..base };
            let theta_before = self.body.theta_base;
            let place = (k + 1) % s.record_every == 0;
            let (moved, hit) = self.body.step_in(&h, upsilon, s.dt, s, Some((self.world, radius)), place);
            self.metrics.path_length += moved;
            self.metrics.heading_change_total += (self.body.theta_base - theta_before).abs();
            if hit {
                self.metrics.collisions += 1;
            }
            if place {
                self.record();
            }
            if let Some(tg) = &target {
                if !matches!(policy, Policy::Corridor) && tg.contains(self.body.head()) {
                    self.metrics.time_to_target = self.body.t;
                    if !place {
                        self.body.place_body();
                        self.record();
                    }
                    break;
                }
            }
        }
        self
    }

    /// Per-horizontal-joint amplitudes from the nearest left and right side
    /// sensors.
    fn corridor_amplitudes(&self, readings: &[f64], side: &[usize]) -> Vec<f64> {
        let snake = &self.cfg.snake;
        let ap = &self.cfg.amplitude;
        let mut out = Vec::new();
        for (j, axis) in snake.axes().into_iter().enumerate() {
            if axis != crate::config::JointAxis::Horizontal {
                continue;
            }
            // joint j sits between segments j and j + 1
            let at = j as f64 + 0.5;
            let nearest = |left: bool| {
                side.iter()
                    .copied()
                    .filter(|&i| (self.layout.mounts[i].angle > 0.0) == left)
                    .min_by(|&a, &b| {
                        let da = (self.layout.mounts[a].segment as f64 - at).abs();
                        let db = (self.layout.mounts[b].segment as f64 - at).abs();
                        da.total_cmp(&db)
                    })
                    .map(|i| readings[i])
            };
            let d = match (nearest(true), nearest(false)) {
                (Some(l), Some(r)) => l.min(r),
                (Some(v), None) | (None, Some(v)) => v,
                (None, None) => f64::INFINITY,
            };
            let a = if d.is_finite() {
                shaped_amplitude(d, ap).expect("readings are non-negative")
            } else {
                ap.a_max
            };
            out.push(a);
        }
        out
    }
}

fn finish<M>(run: Run<'_>, metrics: M) -> ScenarioRun<M> {
    ScenarioRun { trajectory: run.trajectory, offsets: run.offsets, metrics }
}

/// Wander with occasional random turns and head-sensor avoidance until the
/// head enters the target disc or the step budget runs out.
pub fn run_random_walk(cfg: &Config, seed: u64) -> Result<ScenarioRun<ScenarioMetrics>, ConfigError> {
    let world = cfg.require_target_world()?;
    let run = Run::new(cfg, world, seed).execute(Policy::RandomWalk);
    let m = run.metrics;
    Ok(finish(run, m))
}

/// Steer toward the target bearing, deferring to avoidance near obstacles.
pub fn run_target_follow(cfg: &Config, seed: u64) -> Result<ScenarioRun<ScenarioMetrics>, ConfigError> {
    let world = cfg.require_target_world()?;
    let run = Run::new(cfg, world, seed).execute(Policy::TargetFollow);
    let m = run.metrics;
    Ok(finish(run, m))
}

/// Straight run along a corridor with per-joint amplitudes shaped by the side
/// sensors. Lateral extent is measured across the corridor axis (y).
pub fn run_corridor(cfg: &Config, seed: u64) -> Result<ScenarioRun<CorridorMetrics>, ConfigError> {
    let world = cfg.require_world()?;
    let run = Run::new(cfg, world, seed).execute(Policy::Corridor);
    let m = CorridorMetrics { base: run.metrics, max_lateral_extent: run.max_lateral };
    Ok(finish(run, m))
}
