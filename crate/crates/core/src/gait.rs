//! Serpentine joint-command generation.
//!
//! Horizontal joints follow `A sin(ωt + (i−1)φ) + Υ`; vertical joints the same
//! wave with an extra lead `φ₀`. Commands are hard-clamped to the joint limit
//! after the offset is added; the unclamped value is kept on every
//! [`JointCommand`] for analysis.
//!
//! [`DelayLine`] realizes the same travelling wave from a single master
//! oscillator by feeding each joint a delayed copy of the master signal.

use std::f64::consts::TAU;

use crate::config::{GaitParams, JointAxis, SnakeConfig};
use crate::error::GaitError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointCommand {
    /// 1-based position along the body (head first).
    pub joint: usize,
    /// 1-based index among the joints sharing this axis.
    pub ordinal: usize,
    pub axis: JointAxis,
    pub angle: f64,
    pub unclamped: f64,
    pub t: f64,
}

/// Valid joint ordinals `1..=count` and the symmetric angle limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointRange {
    pub count: usize,
    pub limit: f64,
}

impl JointRange {
    fn check(&self, i: usize) -> Result<(), GaitError> {
        if i == 0 || i > self.count {
            return Err(GaitError::JointIndex { index: i, count: self.count });
        }
        Ok(())
    }
}

#[inline]
pub fn saturate(angle: f64, limit: f64) -> f64 {
    angle.clamp(-limit, limit)
}

#[inline]
pub fn horizontal_unclamped(p: &GaitParams, i: usize, t: f64) -> f64 {
    p.amplitude * (p.omega * t + (i as f64 - 1.0) * p.phase_shift).sin() + p.offset
}

#[inline]
pub fn vertical_unclamped(p: &GaitParams, i: usize, t: f64) -> f64 {
    p.amplitude * (p.omega * t + (i as f64 - 1.0) * p.phase_shift + p.phase_offset).sin() + p.offset
}

pub fn horizontal_angle(p: &GaitParams, i: usize, t: f64, range: JointRange) -> Result<f64, GaitError> {
    range.check(i)?;
    Ok(saturate(horizontal_unclamped(p, i, t), range.limit))
}

pub fn vertical_angle(p: &GaitParams, i: usize, t: f64, range: JointRange) -> Result<f64, GaitError> {
    range.check(i)?;
    Ok(saturate(vertical_unclamped(p, i, t), range.limit))
}

/// Commands for every joint of `cfg` at time `t`.
///
/// Each joint is indexed by its ordinal among joints of the same axis, so a
/// 25-joint alternating body runs horizontal ordinals 1..=13 and vertical
/// ordinals 1..=12.
pub fn joint_targets(cfg: &SnakeConfig, h: &GaitParams, v: &GaitParams, t: f64) -> Vec<JointCommand> {
    joint_targets_shaped(cfg, h, v, t, None)
}

/// As [`joint_targets`], with an optional per-horizontal-joint amplitude that
/// replaces `h.amplitude` (indexed by horizontal ordinal − 1).
pub fn joint_targets_shaped(
    cfg: &SnakeConfig,
    h: &GaitParams,
    v: &GaitParams,
    t: f64,
    horizontal_amplitudes: Option<&[f64]>,
) -> Vec<JointCommand> {
    let mut n_h = 0;
    let mut n_v = 0;
    cfg.axes()
        .into_iter()
        .enumerate()
        .map(|(j, axis)| {
            let (ordinal, unclamped) = match axis {
                JointAxis::Horizontal => {
                    n_h += 1;
                    let raw = match horizontal_amplitudes.and_then(|a| a.get(n_h - 1)) {
                        Some(&amp) => horizontal_unclamped(&GaitParams { amplitude: amp, ..*h }, n_h, t),
                        None => horizontal_unclamped(h, n_h, t),
                    };
                    (n_h, raw)
                }
                JointAxis::Vertical => {
                    n_v += 1;
                    (n_v, vertical_unclamped(v, n_v, t))
                }
            };
            JointCommand {
                joint: j + 1,
                ordinal,
                axis,
                angle: saturate(unclamped, cfg.joint_limit),
                unclamped,
                t,
            }
        })
        .collect()
}

/// Master oscillator sample `A sin(ωt) + Υ` fed to a [`DelayLine`].
pub fn master_sample(p: &GaitParams, t: f64) -> f64 {
    p.amplitude * (p.omega * t).sin() + p.offset
}

/// Ring buffer of master-oscillator samples with a fixed per-link delay.
///
/// The per-link delay is the smallest non-negative delay whose phase equals
/// the gait's per-joint increment, `((−φ) mod 2π) / ω`, rounded to a whole
/// number of samples. A wave travelling head-to-tail (`φ < 0`) therefore uses
/// a delay of `|φ|/ω`.
#[derive(Debug, Clone)]
pub struct DelayLine {
    buffer: Vec<f64>,
    next: usize,
    pushed: u64,
    joints: usize,
    delay_samples: usize,
    sample_period: f64,
    rounding_error: f64,
    neutral: f64,
    outputs: Vec<f64>,
}

impl DelayLine {
    pub fn new(p: &GaitParams, joints: usize, sample_period: f64) -> Result<Self, GaitError> {
        if !(sample_period > 0.0) || !(p.omega > 0.0) || joints == 0 {
            return Err(GaitError::BadDelayLine);
        }
        let exact = (-p.phase_shift).rem_euclid(TAU) / p.omega;
        let delay_samples = (exact / sample_period).round() as usize;
        let capacity = (joints - 1) * delay_samples + 1;
        Ok(DelayLine {
            buffer: vec![p.offset; capacity],
            next: 0,
            pushed: 0,
            joints,
            delay_samples,
            sample_period,
            rounding_error: delay_samples as f64 * sample_period - exact,
            neutral: p.offset,
            outputs: vec![p.offset; joints],
        })
    }

    /// Default 1 ms sample period.
    pub fn with_default_period(p: &GaitParams, joints: usize) -> Result<Self, GaitError> {
        Self::new(p, joints, 1e-3)
    }

    pub fn per_link_delay(&self) -> f64 {
        self.delay_samples as f64 * self.sample_period
    }

    pub fn delay_samples(&self) -> usize {
        self.delay_samples
    }

    /// Rounded delay minus the exact delay, in seconds.
    pub fn rounding_error(&self) -> f64 {
        self.rounding_error
    }

    pub fn capacity(&self) -> usize {
        self.buffer.len()
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    /// Time stamp of the next sample to be pushed.
    pub fn next_time(&self) -> f64 {
        self.pushed as f64 * self.sample_period
    }

    /// Pushes one master sample and returns the joint outputs for this tick.
    /// Joints whose delay reaches before the first sample hold the neutral
    /// angle `Υ`.
    pub fn step(&mut self, master: f64) -> &[f64] {
        let cap = self.buffer.len();
        self.buffer[self.next] = master;
        let newest = self.next;
        self.next = (self.next + 1) % cap;
        for (j, out) in self.outputs.iter_mut().enumerate() {
            let lag = j * self.delay_samples;
            *out = if (lag as u64) > self.pushed {
                self.neutral
            } else {
                self.buffer[(newest + cap - lag) % cap]
            };
        }
        self.pushed += 1;
        &self.outputs
    }

    pub fn joints(&self) -> usize {
        self.joints
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SnakeConfig;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_6, PI};

    const WIDE: JointRange = JointRange { count: 25, limit: FRAC_PI_2 };

    #[test]
    fn horizontal_examples() {
        let p = GaitParams::new(FRAC_PI_6, 1.0, TAU / 12.0, 0.0);
        assert_eq!(horizontal_angle(&p, 1, 0.0, WIDE).unwrap(), 0.0);
        // oracle: (pi/6) * sin(pi/6) = pi/12
        let v = horizontal_angle(&p, 2, 0.0, WIDE).unwrap();
        assert!((v - PI / 12.0).abs() < 1e-15);
    }

    #[test]
    fn offset_is_additive_before_clamp() {
        let p = GaitParams::new(0.3, 2.0, 0.4, 0.0);
        let q = GaitParams { offset: 0.17, ..p };
        for i in 1..6 {
            for k in 0..20 {
                let t = k as f64 * 0.13;
                let d = horizontal_unclamped(&q, i, t) - horizontal_unclamped(&p, i, t);
                assert!((d - 0.17).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn index_out_of_range() {
        let p = GaitParams::default();
        let r = JointRange { count: 4, limit: 0.5 };
        assert_eq!(
            horizontal_angle(&p, 0, 0.0, r),
            Err(GaitError::JointIndex { index: 0, count: 4 })
        );
        assert!(horizontal_angle(&p, 5, 0.0, r).is_err());
        assert!(vertical_angle(&p, 5, 0.0, r).is_err());
    }

    #[test]
    fn vertical_examples() {
        let zero = GaitParams::new(0.0, 1.0, 0.3, 0.0).with_phase_offset(1.0);
        for i in 1..5 {
            assert_eq!(vertical_angle(&zero, i, 1.7, WIDE).unwrap(), 0.0);
        }
        let p = GaitParams::new(0.3, 1.0, FRAC_PI_3, 0.0).with_phase_offset(FRAC_PI_2);
        assert!((vertical_angle(&p, 1, 0.0, WIDE).unwrap() - 0.3).abs() < 1e-15);
        let h = GaitParams::new(0.4, 1.3, 0.5, 0.05);
        for i in 1..8 {
            let t = i as f64 * 0.37;
            assert_eq!(
                vertical_angle(&h, i, t, WIDE).unwrap(),
                horizontal_angle(&h, i, t, WIDE).unwrap()
            );
        }
    }

    #[test]
    fn caterpillar_and_planar_targets() {
        let cfg = SnakeConfig::default();
        let h0 = GaitParams { amplitude: 0.0, ..GaitParams::default() };
        let v = GaitParams::default().with_phase_offset(0.0);
        let cmds = joint_targets(&cfg, &h0, &v, 0.3);
        assert_eq!(cmds.len(), 25);
        assert!(cmds.iter().filter(|c| c.axis == JointAxis::Horizontal).all(|c| c.angle == 0.0));
        assert!(cmds.iter().filter(|c| c.axis == JointAxis::Vertical).any(|c| c.angle != 0.0));

        let v0 = GaitParams { amplitude: 0.0, ..GaitParams::default() };
        let cmds = joint_targets(&cfg, &GaitParams::default(), &v0, 0.3);
        assert!(cmds.iter().filter(|c| c.axis == JointAxis::Vertical).all(|c| c.angle == 0.0));
    }

    #[test]
    fn twist_pattern_matches_per_axis_closed_forms() {
        let cfg = SnakeConfig::default();
        let h = GaitParams::new(0.4, 2.0, -0.5, 0.0);
        let v = GaitParams::new(0.25, 2.0, -0.5, 0.0).with_phase_offset(FRAC_PI_2);
        let range_h = JointRange { count: 13, limit: cfg.joint_limit };
        let range_v = JointRange { count: 12, limit: cfg.joint_limit };
        let t = 0.77;
        let cmds = joint_targets(&cfg, &h, &v, t);
        let mut expect = Vec::new();
        for j in 0..25 {
            if j % 2 == 0 {
                expect.push(horizontal_angle(&h, j / 2 + 1, t, range_h).unwrap());
            } else {
                expect.push(vertical_angle(&v, j / 2 + 1, t, range_v).unwrap());
            }
        }
        let got: Vec<f64> = cmds.iter().map(|c| c.angle).collect();
        assert_eq!(got, expect);
    }

    #[test]
    fn delay_line_zero_delay_and_warmup() {
        let p = GaitParams::new(0.3, TAU / 1.2, -TAU / 12.0, 0.1);
        let mut dl = DelayLine::with_default_period(&p, 12).unwrap();
        assert_eq!(dl.delay_samples(), 100);
        assert!(dl.rounding_error().abs() < 1e-12);
        assert!(dl.capacity() > 11 * 100);
        let out = dl.step(0.42).to_vec();
        assert_eq!(out[0], 0.42);
        assert!(out[1..].iter().all(|&v| v == 0.1));
    }

    #[test]
    fn delay_rounding_reported() {
        let p = GaitParams::new(0.3, 1.0, -TAU / 12.0, 0.0);
        let dl = DelayLine::with_default_period(&p, 4).unwrap();
        let exact = TAU / 12.0;
        assert!((dl.per_link_delay() - exact - dl.rounding_error()).abs() < 1e-15);
        assert!(dl.rounding_error().abs() <= 0.5e-3);
    }

    #[test]
    fn delay_line_matches_closed_form_after_warmup() {
        // positive phase shift: the delay wraps to almost a full period
        let p = GaitParams::new(0.35, TAU / 1.2, TAU / 12.0, -0.05);
        let joints = 5;
        let mut dl = DelayLine::with_default_period(&p, joints).unwrap();
        assert_eq!(dl.delay_samples(), 1100);
        let warm = (joints - 1) * dl.delay_samples();
        let mut max_err: f64 = 0.0;
        for k in 0..(warm + 12_000) {
            let t = k as f64 * 1e-3;
            let out = dl.step(master_sample(&p, t)).to_vec();
            if k >= warm {
                for (j, v) in out.iter().enumerate() {
                    max_err = max_err.max((v - horizontal_unclamped(&p, j + 1, t)).abs());
                }
            }
        }
        assert!(max_err < 1e-9, "max error {max_err}");
    }

    proptest! {
        #[test]
        fn periodic_in_time(a in 0.0..1.0f64, w in 0.2..10.0f64, phi in -3.0..3.0f64,
                            off in -0.3..0.3f64, i in 1usize..25, t in 0.0..50.0f64) {
            let p = GaitParams::new(a, w, phi, off);
            let d = horizontal_unclamped(&p, i, t) - horizontal_unclamped(&p, i, t + TAU / w);
            prop_assert!(d.abs() < 1e-12);
        }

        #[test]
        fn spatial_wave_is_time_shift(a in 0.0..1.0f64, w in 0.2..10.0f64, phi in -3.0..3.0f64,
                                      i in 1usize..24, t in 0.0..20.0f64) {
            let p = GaitParams::new(a, w, phi, 0.0);
            let d = horizontal_unclamped(&p, i + 1, t) - horizontal_unclamped(&p, i, t + phi / w);
            prop_assert!(d.abs() < 1e-12);
        }

        #[test]
        fn commands_respect_joint_limit(a in 0.0..2.0f64, w in 0.01..20.0f64, phi in -6.3..6.3f64,
                                        off in -2.0..2.0f64, t in -100.0..100.0f64) {
            let cfg = SnakeConfig::default();
            let h = GaitParams::new(a, w, phi, off);
            let v = GaitParams::new(a * 0.5, w, phi, -off).with_phase_offset(1.0);
            for c in joint_targets(&cfg, &h, &v, t) {
                prop_assert!(c.angle.abs() <= cfg.joint_limit);
            }
        }
    }
}
