use serde::{Deserialize, Serialize};

use super::SimError;
use crate::geometry::{normalize_angle, Footprint, Pose2D};
use crate::locomotion::{limit_twist, Twist};

/// Below this rotation rate the straight-line update is used.
pub const STRAIGHT_LINE_OMEGA: f64 = 1e-9;

/// Physical and kinematic limits of the rover.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoverParams {
    /// Lateral distance between the wheel banks, m.
    pub wheel_track: f64,
    pub footprint: Footprint,
    /// m/s
    pub v_max: f64,
    /// m/s²
    pub a_max: f64,
    /// rad/s
    pub omega_max: f64,
}

impl Default for RoverParams {
    fn default() -> Self {
        Self {
            wheel_track: 0.8,
            footprint: Footprint::default(),
            v_max: 0.1,
            a_max: 0.3,
            omega_max: 0.3,
        }
    }
}

impl RoverParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let checks = [
            ("wheel_track", self.wheel_track),
            ("footprint.length", self.footprint.length),
            ("footprint.width", self.footprint.width),
            ("v_max", self.v_max),
            ("a_max", self.a_max),
            ("omega_max", self.omega_max),
        ];
        for (name, value) in checks {
            if !(value > 0.0 && value.is_finite()) {
                return Err(SimError::InvalidParams(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// Rover pose, applied twist and simulation clock.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RoverState {
    pub pose: Pose2D,
    /// Twist applied during the most recent step.
    pub twist: Twist,
    pub time: f64,
}

impl RoverState {
    pub fn at(pose: Pose2D) -> Self {
        Self {
            pose: Pose2D::new(pose.x, pose.y, normalize_angle(pose.theta)),
            twist: Twist::ZERO,
            time: 0.0,
        }
    }
}

/// Advances the rover by `dt` under `cmd`.
///
/// The command is first limited against the previously applied twist, then
/// integrated along the exact circular arc it describes.
pub fn step_rover(
    state: &RoverState,
    cmd: Twist,
    dt: f64,
    params: &RoverParams,
) -> Result<RoverState, SimError> {
    if !(dt > 0.0) {
        return Err(SimError::NonPositiveStep(dt));
    }
    let applied = limit_twist(state.twist, cmd, dt, params);
    let Pose2D { x, y, theta } = state.pose;
    let Twist { v, omega } = applied;
    let pose = if omega.abs() < STRAIGHT_LINE_OMEGA {
        let (s, c) = theta.sin_cos();
        Pose2D::new(x + v * c * dt, y + v * s * dt, theta)
    } else {
        let turned = theta + omega * dt;
        let r = v / omega;
        Pose2D::new(
            x + r * (turned.sin() - theta.sin()),
            y - r * (turned.cos() - theta.cos()),
            normalize_angle(turned),
        )
    };
    Ok(RoverState {
        pose,
        twist: applied,
        time: state.time + dt,
    })
}
