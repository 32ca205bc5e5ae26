//! Shared domain types and the TOML configuration schema.
//!
//! Angles are radians everywhere in memory. In a file, a bare number is read
//! as radians and a string with a unit suffix (`"30deg"`, `"0.5rad"`) is
//! converted on load. Serializing a [`Config`] always writes plain radians, so
//! a saved config reloads to an identical value.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_6, PI, TAU};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adapt::{AmplitudeShapeParams, FrequencyModParams, SteeringParams};
use crate::dyn3d::Dyn3dSettings;
use crate::error::ConfigError;
use crate::lattice::LatticeSettings;
use crate::sense::{SensorLayout, SensorSettings};
use crate::sim2d::Sim2dSettings;
use crate::world::WorldModel;

pub(crate) mod angle {
    use serde::{de, Deserialize, Deserializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }

    pub fn parse(text: &str) -> Result<f64, String> {
        let t = text.trim();
        let (num, scale) = if let Some(v) = t.strip_suffix("deg").or_else(|| t.strip_suffix('°')) {
            (v, std::f64::consts::PI / 180.0)
        } else if let Some(v) = t.strip_suffix("rad") {
            (v, 1.0)
        } else {
            return Err(format!("angle `{t}` needs a `deg` or `rad` suffix"));
        };
        num.trim()
            .parse::<f64>()
            .map(|v| v * scale)
            .map_err(|e| format!("bad angle `{t}`: {e}"))
    }

    pub fn de<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(s) => parse(&s).map_err(de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum JointAxis {
    #[serde(alias = "H", alias = "horizontal")]
    Horizontal,
    #[serde(alias = "V", alias = "vertical")]
    Vertical,
}

/// How joint axes are laid out along the body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AxisLayout {
    Named(NamedLayout),
    Explicit(Vec<JointAxis>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedLayout {
    /// H, V, H, V, ... starting at the head.
    Alternating,
    /// Every joint horizontal.
    Planar,
}

impl Default for AxisLayout {
    fn default() -> Self {
        AxisLayout::Named(NamedLayout::Alternating)
    }
}

/// Geometry and mass properties of the robot.
///
/// Link length and mass defaults (0.09 m, 0.15 kg) are toolkit choices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnakeConfig {
    pub n_links: usize,
    pub link_length: f64,
    pub link_mass: f64,
    /// Half the body width; sensor origins sit on the body surface.
    pub body_half_width: f64,
    #[serde(deserialize_with = "angle::de")]
    pub joint_limit: f64,
    pub joint_axes: AxisLayout,
    pub sensors: SensorSettings,
}

impl Default for SnakeConfig {
    fn default() -> Self {
        SnakeConfig {
            n_links: 26,
            link_length: 0.09,
            link_mass: 0.15,
            body_half_width: 0.03,
            joint_limit: FRAC_PI_6,
            joint_axes: AxisLayout::default(),
            sensors: SensorSettings::default(),
        }
    }
}

impl SnakeConfig {
    pub fn with_links(n_links: usize) -> Self {
        SnakeConfig {
            n_links,
            ..Default::default()
        }
    }

    pub fn n_joints(&self) -> usize {
        self.n_links.saturating_sub(1)
    }

    pub fn axes(&self) -> Vec<JointAxis> {
        match &self.joint_axes {
            AxisLayout::Named(NamedLayout::Alternating) => (0..self.n_joints())
                .map(|j| if j % 2 == 0 { JointAxis::Horizontal } else { JointAxis::Vertical })
                .collect(),
            AxisLayout::Named(NamedLayout::Planar) => vec![JointAxis::Horizontal; self.n_joints()],
            AxisLayout::Explicit(v) => v.clone(),
        }
    }

    pub fn count_axis(&self, axis: JointAxis) -> usize {
        self.axes().iter().filter(|&&a| a == axis).count()
    }

    pub fn sensor_layout(&self) -> SensorLayout {
        self.sensors.layout(self)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_links < 2 {
            return Err(ConfigError::invalid("snake.n_links", "must be at least 2"));
        }
        if !(self.link_length > 0.0) || !self.link_length.is_finite() {
            return Err(ConfigError::invalid("snake.link_length", "must be positive"));
        }
        if !(self.link_mass > 0.0) || !self.link_mass.is_finite() {
            return Err(ConfigError::invalid("snake.link_mass", "must be positive"));
        }
        if !(self.body_half_width >= 0.0) || self.body_half_width >= self.link_length {
            return Err(ConfigError::invalid(
                "snake.body_half_width",
                "must be in [0, link_length)",
            ));
        }
        if !(self.joint_limit > 0.0 && self.joint_limit <= FRAC_PI_2) {
            return Err(ConfigError::invalid("snake.joint_limit", "must be in (0, pi/2]"));
        }
        if let AxisLayout::Explicit(v) = &self.joint_axes {
            if v.len() != self.n_joints() {
                return Err(ConfigError::invalid(
                    "snake.joint_axes",
                    format!("expected {} entries, got {}", self.n_joints(), v.len()),
                ));
            }
        }
        self.sensors.validate(self.n_links)
    }

    /// True when the joint axes strictly alternate between horizontal and vertical.
    pub fn alternates(&self) -> bool {
        self.axes().windows(2).all(|w| w[0] != w[1])
    }
}

/// Amplitude / frequency / phase / offset of one gait axis.
///
/// `phase_shift` is the per-joint phase increment; `phase_offset` is only used
/// by the vertical wave (its lead over the horizontal one).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaitParams {
    #[serde(deserialize_with = "angle::de")]
    pub amplitude: f64,
    pub omega: f64,
    #[serde(deserialize_with = "angle::de")]
    pub phase_shift: f64,
    #[serde(deserialize_with = "angle::de")]
    pub offset: f64,
    #[serde(deserialize_with = "angle::de")]
    pub phase_offset: f64,
}

impl Default for GaitParams {
    fn default() -> Self {
        GaitParams {
            amplitude: 0.3,
            omega: TAU,
            phase_shift: -TAU / 12.0,
            offset: 0.0,
            phase_offset: 0.0,
        }
    }
}

impl GaitParams {
    pub fn new(amplitude: f64, omega: f64, phase_shift: f64, offset: f64) -> Self {
        GaitParams {
            amplitude,
            omega,
            phase_shift,
            offset,
            phase_offset: 0.0,
        }
    }

    pub fn with_phase_offset(mut self, phase_offset: f64) -> Self {
        self.phase_offset = phase_offset;
        self
    }

    pub fn period(&self) -> f64 {
        TAU / self.omega
    }

    fn validate(&self, key: &str) -> Result<(), ConfigError> {
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return Err(ConfigError::invalid(format!("{key}.amplitude"), "must be >= 0"));
        }
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(ConfigError::invalid(format!("{key}.omega"), "must be > 0"));
        }
        for (name, v) in [
            ("phase_shift", self.phase_shift),
            ("offset", self.offset),
            ("phase_offset", self.phase_offset),
        ] {
            if !v.is_finite() {
                return Err(ConfigError::invalid(format!("{key}.{name}"), "must be finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaitPair {
    pub horizontal: GaitParams,
    pub vertical: GaitParams,
}

impl Default for GaitPair {
    fn default() -> Self {
        GaitPair {
            horizontal: GaitParams::default(),
            vertical: GaitParams {
                amplitude: 0.0,
                phase_offset: PI / 2.0,
                ..GaitParams::default()
            },
        }
    }
}

/// Everything a config file can hold. Omitted tables and keys take defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub snake: SnakeConfig,
    pub gait: GaitPair,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub world: Option<WorldModel>,
    pub steering: SteeringParams,
    pub amplitude: AmplitudeShapeParams,
    pub frequency: FrequencyModParams,
    pub sim2d: Sim2dSettings,
    pub dyn3d: Dyn3dSettings,
    pub lattice: LatticeSettings,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 0,
            snake: SnakeConfig::default(),
            gait: GaitPair::default(),
            world: None,
            steering: SteeringParams::default(),
            amplitude: AmplitudeShapeParams::default(),
            frequency: FrequencyModParams::default(),
            sim2d: Sim2dSettings::default(),
            dyn3d: Dyn3dSettings::default(),
            lattice: LatticeSettings::default(),
        }
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    /// Checks every invariant, reporting the first violation by key.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.snake.validate()?;
        self.gait.horizontal.validate("gait.horizontal")?;
        self.gait.vertical.validate("gait.vertical")?;
        if self.gait.vertical.amplitude > 0.0 && !self.snake.alternates() {
            return Err(ConfigError::invalid(
                "snake.joint_axes",
                "vertical gait requires alternating horizontal/vertical joints",
            ));
        }
        if let Some(w) = &self.world {
            w.validate()?;
        }
        self.steering.validate(self.snake.joint_limit)?;
        self.amplitude.validate(self.snake.joint_limit)?;
        self.frequency.validate(self.gait.horizontal.omega)?;
        self.sim2d.validate()?;
        self.dyn3d.validate(self.snake.link_mass)?;
        self.lattice.validate()?;
        Ok(())
    }

    pub fn require_world(&self) -> Result<&WorldModel, ConfigError> {
        self.world.as_ref().ok_or_else(|| ConfigError::Missing("world".into()))
    }

    /// World with a target, as the goal-seeking scenarios need.
    pub fn require_target_world(&self) -> Result<&WorldModel, ConfigError> {
        let w = self.require_world()?;
        if w.target.is_none() {
            return Err(ConfigError::Missing("world.target".into()));
        }
        Ok(w)
    }
}

/// Reads, parses and validates a config file.
pub fn load_config(path: impl AsRef<Path>) -> Result<Config, ConfigError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Config::from_toml_str(&text)
}
