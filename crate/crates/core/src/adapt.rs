//! Adaptive gait laws: distance-driven turn offset, side-sensor amplitude
//! shaping, tail-triggered frequency boost and compass steering toward a
//! target.

use serde::{Deserialize, Serialize};

use crate::config::{angle, GaitParams};
use crate::error::{AdaptError, ConfigError};
use crate::world::wrap_angle;

/// Turn-offset parameters. `k_turn` and the amplitude law's `k_amp` are
/// separate on purpose: they act on different quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteeringParams {
    /// Largest turn offset, applied at zero distance.
    #[serde(deserialize_with = "angle::de")]
    pub f0: f64,
    /// Decay rate of the offset with obstacle distance, 1/m.
    pub k_turn: f64,
    /// Proportional gain from heading error to offset.
    pub blend_gain: f64,
}

impl Default for SteeringParams {
    fn default() -> Self {
        SteeringParams {
            f0: 0.2,
            k_turn: 2.0,
            blend_gain: 0.5,
        }
    }
}

impl SteeringParams {
    pub fn validate(&self, joint_limit: f64) -> Result<(), ConfigError> {
        if !(self.f0 > 0.0) || self.f0 > joint_limit {
            return Err(ConfigError::invalid("steering.f0", "must be in (0, joint_limit]"));
        }
        if !(self.k_turn > 0.0) || !self.k_turn.is_finite() {
            return Err(ConfigError::invalid("steering.k_turn", "must be positive"));
        }
        if !(self.blend_gain >= 0.0) || !self.blend_gain.is_finite() {
            return Err(ConfigError::invalid("steering.blend_gain", "must be >= 0"));
        }
        Ok(())
    }
}

/// Which distance-to-amplitude law to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmplitudeLaw {
    /// `clamp(e^{k d} − A_max, 0, A_max)`.
    #[default]
    Printed,
    /// `A_max (1 − e^{−k d})`.
    Saturating,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmplitudeShapeParams {
    pub k_amp: f64,
    #[serde(deserialize_with = "angle::de")]
    pub a_max: f64,
    pub law: AmplitudeLaw,
}

impl Default for AmplitudeShapeParams {
    fn default() -> Self {
        AmplitudeShapeParams {
            k_amp: 0.1,
            a_max: std::f64::consts::FRAC_PI_6,
            law: AmplitudeLaw::Printed,
        }
    }
}

impl AmplitudeShapeParams {
    pub fn new(k_amp: f64, a_max: f64) -> Self {
        AmplitudeShapeParams {
            k_amp,
            a_max,
            law: AmplitudeLaw::Printed,
        }
    }

    pub fn validate(&self, joint_limit: f64) -> Result<(), ConfigError> {
        if !(self.k_amp > 0.0) || !self.k_amp.is_finite() {
            return Err(ConfigError::invalid("amplitude.k_amp", "must be positive"));
        }
        if !(self.a_max > 0.0) || self.a_max > joint_limit * (1.0 + 1e-12) {
            return Err(ConfigError::invalid("amplitude.a_max", "must be in (0, joint_limit]"));
        }
        Ok(())
    }

    /// Distance beyond which the shaped amplitude sits at `A_max`
    /// (infinite for the saturating law; zero when the printed law never
    /// drops below `A_max`).
    pub fn saturation_distance(&self) -> f64 {
        match self.law {
            AmplitudeLaw::Printed => ((2.0 * self.a_max).ln() / self.k_amp).max(0.0),
            AmplitudeLaw::Saturating => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrequencyModParams {
    /// Relative frequency boost at zero tail distance.
    pub boost_gain: f64,
    pub k_tail: f64,
    pub omega_max: f64,
}

impl Default for FrequencyModParams {
    fn default() -> Self {
        FrequencyModParams {
            boost_gain: 1.0,
            k_tail: 5.0,
            omega_max: 4.0 * std::f64::consts::PI,
        }
    }
}

impl FrequencyModParams {
    pub fn validate(&self, base_omega: f64) -> Result<(), ConfigError> {
        if !(self.boost_gain >= 0.0) || !self.boost_gain.is_finite() {
            return Err(ConfigError::invalid("frequency.boost_gain", "must be >= 0"));
        }
        if !(self.k_tail > 0.0) || !self.k_tail.is_finite() {
            return Err(ConfigError::invalid("frequency.k_tail", "must be positive"));
        }
        if !(self.omega_max >= base_omega) {
            return Err(ConfigError::invalid(
                "frequency.omega_max",
                "must be at least the base gait frequency",
            ));
        }
        Ok(())
    }
}

fn check_distance(d: f64) -> Result<(), AdaptError> {
    if d >= 0.0 {
        Ok(())
    } else {
        Err(AdaptError::NegativeDistance(d))
    }
}

/// `sign · f₀ · e^{−k d}`: turn offset for an obstacle `d` metres ahead.
pub fn steering_offset(d: f64, phase_sign: f64, sp: &SteeringParams) -> Result<f64, AdaptError> {
    check_distance(d)?;
    Ok(phase_sign.signum() * sp.f0 * (-sp.k_turn * d).exp())
}

/// Sign of the master oscillator `sin(ωt)`; zero counts as positive.
pub fn phase_sign(h: &GaitParams, t: f64) -> f64 {
    phase_sign_of((h.omega * t).sin())
}

pub(crate) fn phase_sign_of(s: f64) -> f64 {
    if s < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Amplitude for a joint whose side sensor reads `d`, always in `[0, A_max]`.
pub fn shaped_amplitude(d: f64, ap: &AmplitudeShapeParams) -> Result<f64, AdaptError> {
    check_distance(d)?;
    Ok(match ap.law {
        AmplitudeLaw::Printed => ((ap.k_amp * d).exp() - ap.a_max).clamp(0.0, ap.a_max),
        AmplitudeLaw::Saturating => ap.a_max * (1.0 - (-ap.k_amp * d).exp()),
    })
}

/// `min(ω (1 + c e^{−k d}), ω_max)` for a tail obstacle at `d_tail`.
pub fn tail_frequency(d_tail: f64, base_omega: f64, fp: &FrequencyModParams) -> Result<f64, AdaptError> {
    check_distance(d_tail)?;
    let boosted = base_omega * (1.0 + fp.boost_gain * (-fp.k_tail * d_tail).exp());
    Ok(boosted.min(fp.omega_max))
}

/// Proportional steering toward the target bearing along the shorter arc,
/// limited to `±f₀`.
pub fn target_heading_offset(current_heading: f64, target_bearing: f64, sp: &SteeringParams) -> f64 {
    let err = wrap_angle(target_bearing - current_heading);
    (sp.blend_gain * err).clamp(-sp.f0, sp.f0)
}

/// Arbitration between avoidance and target following.
///
/// Inside `d_safe` only the obstacle offset counts; outside it the two add.
/// The result is limited so `amplitude + |Υ|` stays within the joint limit.
pub fn combine(
    obstacle_offset: f64,
    target_offset: f64,
    d_head: f64,
    d_safe: f64,
    amplitude: f64,
    joint_limit: f64,
) -> f64 {
    let raw = if d_head < d_safe {
        obstacle_offset
    } else {
        target_offset + obstacle_offset
    };
    clamp_offset(raw, amplitude, joint_limit)
}

/// Limits an offset so that `amplitude + |offset| ≤ joint_limit`.
pub fn clamp_offset(offset: f64, amplitude: f64, joint_limit: f64) -> f64 {
    let room = (joint_limit - amplitude).max(0.0);
    offset.clamp(-room, room)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{E, FRAC_PI_2, FRAC_PI_4, PI};

    fn sp() -> SteeringParams {
        SteeringParams { f0: 0.4, k_turn: 3.0, blend_gain: 0.5 }
    }

    #[test]
    fn steering_examples() {
        let s = sp();
        assert_eq!(steering_offset(0.0, 1.0, &s).unwrap(), 0.4);
        assert_eq!(steering_offset(0.0, -1.0, &s).unwrap(), -0.4);
        assert!(steering_offset(1e3, 1.0, &s).unwrap() < 1e-300);
        let v = steering_offset(1.0 / 3.0, 1.0, &s).unwrap();
        assert!((v - 0.4 / E).abs() < 1e-15);
        assert_eq!(steering_offset(-0.1, 1.0, &s), Err(AdaptError::NegativeDistance(-0.1)));
    }

    #[test]
    fn phase_sign_examples() {
        let h = GaitParams::new(0.3, 2.0, 0.0, 0.0);
        assert_eq!(phase_sign(&h, PI / 4.0), 1.0);
        assert_eq!(phase_sign(&h, 3.0 * PI / 4.0), -1.0);
        assert_eq!(phase_sign(&h, 0.0), 1.0);
    }

    #[test]
    fn shaped_amplitude_examples() {
        let ap = AmplitudeShapeParams::new(2.0, 1.2);
        let sat = (2.0f64 * 1.2).ln() / 2.0;
        assert!((ap.saturation_distance() - sat).abs() < 1e-15);
        assert_eq!(shaped_amplitude(sat + 1e-9, &ap).unwrap(), 1.2);
        assert_eq!(shaped_amplitude(5.0, &ap).unwrap(), 1.2);
        assert_eq!(shaped_amplitude(0.0, &ap).unwrap(), 0.0);
        let half = (1.2f64 + 0.6).ln() / 2.0;
        assert!((shaped_amplitude(half, &ap).unwrap() - 0.6).abs() < 1e-12);
        assert!(shaped_amplitude(-1.0, &ap).is_err());
    }

    #[test]
    fn saturating_law_switch() {
        let ap = AmplitudeShapeParams { law: AmplitudeLaw::Saturating, ..AmplitudeShapeParams::new(2.0, 0.5) };
        assert_eq!(shaped_amplitude(0.0, &ap).unwrap(), 0.0);
        let v = shaped_amplitude(0.5, &ap).unwrap();
        assert!((v - 0.5 * (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn tail_frequency_examples() {
        let fp = FrequencyModParams { boost_gain: 1.0, k_tail: 4.0, omega_max: 10.0 };
        assert_eq!(tail_frequency(1e4, 3.0, &fp).unwrap(), 3.0);
        assert_eq!(tail_frequency(0.0, 3.0, &fp).unwrap(), 6.0);
        assert_eq!(tail_frequency(0.0, 6.0, &fp).unwrap(), 10.0);
        let off = FrequencyModParams { boost_gain: 0.0, ..fp };
        for d in [0.0, 0.1, 1.0, 7.0] {
            assert_eq!(tail_frequency(d, 3.0, &off).unwrap(), 3.0);
        }
        assert!(tail_frequency(-0.5, 3.0, &fp).is_err());
    }

    #[test]
    fn target_offset_examples() {
        let s = SteeringParams { f0: 1.0, k_turn: 1.0, blend_gain: 0.5 };
        assert_eq!(target_heading_offset(0.7, 0.7, &s), 0.0);
        assert!((target_heading_offset(0.0, FRAC_PI_2, &s) - FRAC_PI_4).abs() < 1e-15);
        let small = SteeringParams { f0: 0.3, ..s };
        assert_eq!(target_heading_offset(0.0, FRAC_PI_2, &small), 0.3);
        assert!(target_heading_offset(0.0, -1e-6, &s) < 0.0);
        // shortest path across the ±π seam
        assert!(target_heading_offset(3.0, -3.0, &s) > 0.0);
    }

    #[test]
    fn combine_examples() {
        let lim = std::f64::consts::FRAC_PI_6;
        assert!((combine(1e-12, 0.1, 2.0, 0.5, 0.2, lim) - 0.1).abs() < 1e-9);
        assert_eq!(combine(-0.2, 0.1, 0.0, 0.5, 0.2, lim), -0.2);
        assert_eq!(combine(0.0, 0.0, 1.0, 0.5, 0.2, lim), 0.0);
        // limited to joint_limit - amplitude
        assert_eq!(combine(0.5, 0.0, 0.0, 0.5, 0.3, lim), lim - 0.3);
    }

    proptest! {
        #[test]
        fn steering_magnitude_strictly_decreasing(a in 0.0..3.0f64, b in 0.0..3.0f64) {
            prop_assume!((a - b).abs() > 1e-6);
            let s = sp();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(steering_offset(lo, -1.0, &s).unwrap().abs() > steering_offset(hi, -1.0, &s).unwrap().abs());
        }

        #[test]
        fn shaped_amplitude_monotone_bounded(a in 0.0..5.0f64, b in 0.0..5.0f64,
                                             k in 0.05..5.0f64, amax in 0.05..1.5f64) {
            for law in [AmplitudeLaw::Printed, AmplitudeLaw::Saturating] {
                let ap = AmplitudeShapeParams { k_amp: k, a_max: amax, law };
                let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                let (x, y) = (shaped_amplitude(lo, &ap).unwrap(), shaped_amplitude(hi, &ap).unwrap());
                prop_assert!(x <= y);
                prop_assert!((0.0..=amax).contains(&x) && (0.0..=amax).contains(&y));
            }
        }

        #[test]
        fn combine_respects_limit(obs in -1.0..1.0f64, tgt in -1.0..1.0f64, d in 0.0..3.0f64,
                                  amp in 0.0..0.6f64) {
            let lim = std::f64::consts::FRAC_PI_6;
            let u = combine(obs, tgt, d, 0.5, amp, lim);
            prop_assert!(amp.min(lim) + u.abs() <= lim + 1e-15);
        }
    }
}
