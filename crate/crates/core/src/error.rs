use std::path::PathBuf;

use thiserror::Error;

/// Errors raised while reading or validating a configuration file.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("missing required key `{0}`")]
    Missing(String),
}

impl ConfigError {
    pub(crate) fn invalid(key: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// The dotted key of the offending entry, when there is one.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { key, .. } | ConfigError::Missing(key) => Some(key),
            _ => None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum GaitError {
    #[error("joint index {index} out of range 1..={count}")]
    JointIndex { index: usize, count: usize },
    #[error("delay line needs sample period > 0 and omega > 0")]
    BadDelayLine,
}

#[derive(Debug, Error, PartialEq)]
pub enum AdaptError {
    #[error("distance must be non-negative, got {0}")]
    NegativeDistance(f64),
    #[error("invalid parameter `{0}`")]
    Param(&'static str),
}

#[derive(Debug, Error, PartialEq)]
pub enum SenseError {
    #[error("ray direction has zero length")]
    ZeroDirection,
    #[error("max range must be positive")]
    BadRange,
}

#[derive(Debug, Error, PartialEq)]
pub enum Sim2dError {
    #[error("time step {0} outside (0, 0.05]")]
    TimeStep(f64),
    #[error("scenario needs `{0}`")]
    Missing(&'static str),
}

#[derive(Debug, Error, PartialEq)]
pub enum DynError {
    #[error("integrator blow-up at t = {time:.6} s: link {link} speed {speed:.3e} m/s")]
    Blowup { time: f64, link: usize, speed: f64 },
    #[error("time step {dt} exceeds stability bound {bound:.6e} s")]
    Unstable { dt: f64, bound: f64 },
    #[error("chain needs at least one link")]
    Empty,
    #[error("joint target count {got} does not match {expected} joints")]
    Targets { got: usize, expected: usize },
}

#[derive(Debug, Error, PartialEq)]
pub enum LatticeError {
    #[error("time step {0} outside (0, 0.01]")]
    TimeStep(f64),
    #[error("lattice needs at least 2 generators, got {0}")]
    TooSmall(usize),
    #[error("coupling has {got} edges, expected {expected}")]
    Edges { got: usize, expected: usize },
    #[error("need at least {needed} samples covering 3 periods, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
}
