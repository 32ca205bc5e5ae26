//! Simulation toolkit for modular snake robots: serpentine gait generation,
//! sensor-driven gait adaptation, a planar kinematic simulator, 3D multibody
//! dynamics with ground contact and anisotropic friction, and a chain of
//! coupled rhythm generators.
//!
//! All angles are radians. Runs are deterministic for a given seed.

pub mod adapt;
pub mod cli;
pub mod config;
pub mod dyn3d;
pub mod error;
pub mod gait;
pub mod lattice;
pub mod output;
pub mod rng;
pub mod sense;
pub mod sim2d;
pub mod world;

pub use config::{load_config, Config, GaitPair, GaitParams, JointAxis, SnakeConfig};
pub use error::{AdaptError, ConfigError, DynError, GaitError, LatticeError, SenseError, Sim2dError};
pub use world::WorldModel;
