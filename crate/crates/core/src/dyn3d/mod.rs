//! 3D rigid-body dynamics of the link chain on a compliant ground plane.
//!
//! The chain is simulated in reduced coordinates: a free-floating head link
//! plus one angle per joint. Ground contact is a per-link spring-damper at the
//! link centre, friction is regularized Coulomb with separate longitudinal and
//! transversal coefficients, and joints are driven by torque-limited PD servos.

mod chain;
mod gait_run;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

pub use chain::{Chain, ChainState, ContactReport, Dyn3dSim, LinkState};
pub use gait_run::{simulate_gait_3d, Dyn3dSummary, GaitRun3d, LinkFit, LinkRow};

/// `[dyn3d]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Dyn3dSettings {
    pub dt: f64,
    pub gravity: f64,
    pub k_spring: f64,
    pub d_damp: f64,
    pub mu_t: f64,
    pub mu_n: f64,
    pub eps_v: f64,
    pub kp: f64,
    pub kd: f64,
    pub torque_limit: f64,
    /// Any link faster than this aborts the run, m/s.
    pub v_blowup: f64,
    pub duration: f64,
    /// Trajectory sampling interval in steps.
    pub record_every: usize,
    /// Gait periods at the end of a run used for amplitude/phase fits.
    pub fit_periods: f64,
}

impl Default for Dyn3dSettings {
    fn default() -> Self {
        Dyn3dSettings {
            dt: 5e-4,
            gravity: 9.81,
            k_spring: 1e4,
            d_damp: 50.0,
            mu_t: 0.1,
            mu_n: 0.5,
            eps_v: 1e-3,
            kp: 2.0,
            kd: 0.02,
            torque_limit: 1.0,
            v_blowup: 50.0,
            duration: 10.0,
            record_every: 20,
            fit_periods: 5.0,
        }
    }
}

impl Dyn3dSettings {
    pub fn contact(&self) -> ContactParams {
        ContactParams { k_spring: self.k_spring, d_damp: self.d_damp }
    }

    pub fn friction(&self) -> FrictionParams {
        FrictionParams { mu_t: self.mu_t, mu_n: self.mu_n, eps_v: self.eps_v }
    }

    pub fn actuation(&self) -> JointActuation {
        JointActuation { kp: self.kp, kd: self.kd, torque_limit: self.torque_limit }
    }

    /// Largest stable step for links of mass `link_mass`: `0.2 √(m/k)`.
    pub fn stability_bound(&self, link_mass: f64) -> f64 {
        0.2 * (link_mass / self.k_spring).sqrt()
    }

    pub(crate) fn validate(&self, link_mass: f64) -> Result<(), ConfigError> {
        if !(self.k_spring > 0.0) || !self.k_spring.is_finite() {
            return Err(ConfigError::invalid("dyn3d.k_spring", "must be positive"));
        }
        if !(self.d_damp >= 0.0) {
            return Err(ConfigError::invalid("dyn3d.d_damp", "must be >= 0"));
        }
        if !(self.dt > 0.0) {
            return Err(ConfigError::invalid("dyn3d.dt", "must be positive"));
        }
        let bound = self.stability_bound(link_mass);
        if self.dt > bound {
            return Err(ConfigError::invalid(
                "dyn3d.dt",
                format!("{} exceeds the stability bound 0.2*sqrt(m/k_spring) = {bound:.6e} s", self.dt),
            ));
        }
        if !(self.gravity >= 0.0) || !self.gravity.is_finite() {
            return Err(ConfigError::invalid("dyn3d.gravity", "must be >= 0"));
        }
        if !(self.mu_t >= 0.0 && self.mu_t <= self.mu_n) || !self.mu_n.is_finite() {
            return Err(ConfigError::invalid("dyn3d.mu_t", "need 0 <= mu_t <= mu_n"));
        }
        if !(self.eps_v > 0.0) {
            return Err(ConfigError::invalid("dyn3d.eps_v", "must be positive"));
        }
        if !(self.kp >= 0.0) || !(self.kd >= 0.0) {
            return Err(ConfigError::invalid("dyn3d.kp", "gains must be >= 0"));
        }
        if !(self.torque_limit > 0.0) {
            return Err(ConfigError::invalid("dyn3d.torque_limit", "must be positive"));
        }
        if !(self.v_blowup > 0.0) {
            return Err(ConfigError::invalid("dyn3d.v_blowup", "must be positive"));
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(ConfigError::invalid("dyn3d.duration", "must be positive"));
        }
        if self.record_every == 0 {
            return Err(ConfigError::invalid("dyn3d.record_every", "must be >= 1"));
        }
        if !(self.fit_periods >= 3.0) {
            return Err(ConfigError::invalid("dyn3d.fit_periods", "must be >= 3"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactParams {
    pub k_spring: f64,
    pub d_damp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionParams {
    /// Along the body axis.
    pub mu_t: f64,
    /// Across the body axis.
    pub mu_n: f64,
    pub eps_v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointActuation {
    pub kp: f64,
    pub kd: f64,
    pub torque_limit: f64,
}

/// Spring-damper ground reaction: `−k p_z − d v_z` while below the ground,
/// never pulling.
pub fn normal_force(p_z: f64, v_z: f64, cp: &ContactParams) -> f64 {
    if p_z < 0.0 {
        (-cp.k_spring * p_z - cp.d_damp * v_z).max(0.0)
    } else {
        0.0
    }
}

/// Planar friction on a link sliding with `v_planar`, split along and across
/// `body_axis` (unit length). Each component is `μ F_n v_c / (|v| + ε_v)`,
/// so the force is bounded by `μ_t F_n` along and `μ_n F_n` across the body
/// and points straight against the motion when `μ_t = μ_n`.
pub fn friction_force(f_n: f64, v_planar: Vector2<f64>, body_axis: Vector2<f64>, fp: &FrictionParams) -> Vector2<f64> {
    if f_n <= 0.0 {
        return Vector2::zeros();
    }
    let across = Vector2::new(-body_axis.y, body_axis.x);
    let vl = v_planar.dot(&body_axis);
    let vt = v_planar.dot(&across);
    let scale = f_n / (v_planar.norm() + fp.eps_v);
    -(body_axis * (fp.mu_t * vl) + across * (fp.mu_n * vt)) * scale
}
