//! Deterministic 2D Dubins-vehicle world.
//!
//! Conventions: positions in meters, `heading` in radians measured
//! counter-clockwise from east, positive steering action turns clockwise.

mod dogfight;
mod geometry;
mod reward;
mod scenario;
mod vehicle;
mod world;

pub use dogfight::{observe_dogfight, DogfightWorld, DOGFIGHT_OBS_DIM};
pub use geometry::{lidar_scan, Rect, LIDAR_RAYS};
pub use reward::{aa_ata, dogfight_reward, goal_reward, Events};
pub use scenario::{DogfightParams, RewardParams, Scenario, ScenarioFile};
pub use vehicle::{
    normalize_angle, VehicleState, ACCEL_GAIN, FRICTION_DECEL, MAX_ACCEL, MAX_SPEED, MAX_TURN,
    STEER_DEAD_ZONE, THROTTLE_DEAD_ZONE, VEHICLE_LENGTH,
};
pub use world::{goal_descriptor, GoalWorld, StepResult, GOAL_DIM, GOAL_OBS_DIM};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("undefined geometry: attacker and target coincide")]
    UndefinedGeometry,
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("invalid agent id {0}")]
    InvalidAgent(usize),
}

pub type Result<T> = std::result::Result<T, SimError>;
