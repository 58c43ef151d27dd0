//! Deterministic 2.5D world: scene geometry, rover kinematics, a planar depth
//! sensor and a flat-shaded navigation camera.

mod camera;
mod rover;
mod scene;
mod sensor;

pub use camera::{render_camera, CameraConfig};
pub use rover::{step_rover, RoverParams, RoverState, STRAIGHT_LINE_OMEGA};
pub use scene::{load_scene, parse_scene, Bounds, Obstacle, SceneError, Shape, WorldScene};
pub use sensor::{sense_depth, DepthRay, DepthScan, DepthSensor, DepthSensorConfig, RayHit};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("time step must be positive, got {0} s")]
    NonPositiveStep(f64),
    #[error("invalid rover parameters: {0}")]
    InvalidParams(String),
    #[error("invalid sensor configuration: {0}")]
    InvalidSensor(String),
    #[error("invalid camera configuration: {0}")]
    InvalidCamera(String),
}
