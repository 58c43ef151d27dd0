use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{normalize_angle, Point2, Pose2D};
use crate::locomotion::{levers_to_twist, Twist};
use crate::world::RoverParams;

/// Navigation goal placed by the operator; the arrow tip gives the heading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalPose {
    pub id: String,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CommandError {
    #[error("goal {0:?} has a non-finite coordinate")]
    NonFiniteGoal(String),
    #[error("goal id must not be empty")]
    EmptyGoalId,
    #[error("lever values must be finite")]
    NonFiniteLever,
    #[error("goal drag has zero length")]
    ZeroLengthDrag,
    #[error("malformed command: {0}")]
    Malformed(String),
}

impl GoalPose {
    pub fn new(id: impl Into<String>, x: f64, y: f64, theta: f64) -> Self {
        Self {
            id: id.into(),
            x,
            y,
            theta,
        }
    }

    /// Checks finiteness and wraps the heading into `(-π, π]`.
    pub fn normalized(mut self) -> Result<Self, CommandError> {
        if self.id.is_empty() {
            return Err(CommandError::EmptyGoalId);
        }
        if !(self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()) {
            return Err(CommandError::NonFiniteGoal(self.id));
        }
        self.theta = normalize_angle(self.theta);
        Ok(self)
    }

    pub fn pose(&self) -> Pose2D {
        Pose2D::new(self.x, self.y, self.theta)
    }

    /// Goal from an arrow drag: the press point is the position, the
    /// direction towards the release point is the heading.
    pub fn from_drag(id: impl Into<String>, press: Point2, release: Point2) -> Result<Self, CommandError> {
        let (dx, dy) = (release.x - press.x, release.y - press.y);
        if dx == 0.0 && dy == 0.0 {
            return Err(CommandError::ZeroLengthDrag);
        }
        Self::new(id, press.x, press.y, dy.atan2(dx)).normalized()
    }
}

/// Messages from the console, as `{"type": ..., fields}` JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OperatorCommand {
    JoystickTwist { lever_fwd: f64, lever_rot: f64 },
    SetGoal(GoalPose),
    CancelGoal,
    EmergencyStop,
}

impl OperatorCommand {
    /// Clamps levers, validates goals.
    pub fn sanitized(self) -> Result<Self, CommandError> {
        match self {
            OperatorCommand::JoystickTwist { lever_fwd, lever_rot } => {
                if !(lever_fwd.is_finite() && lever_rot.is_finite()) {
                    return Err(CommandError::NonFiniteLever);
                }
                Ok(OperatorCommand::JoystickTwist {
                    lever_fwd: lever_fwd.clamp(-1.0, 1.0),
                    lever_rot: lever_rot.clamp(-1.0, 1.0),
                })
            }
            OperatorCommand::SetGoal(g) => Ok(OperatorCommand::SetGoal(g.normalized()?)),
            other => Ok(other),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CommandError> {
        serde_json::from_str::<OperatorCommand>(text)
            .map_err(|e| CommandError::Malformed(e.to_string()))?
            .sanitized()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("command serializes")
    }
}

/// What actually crosses the uplink: levers are already mapped to a twist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum UplinkCommand {
    Twist { v: f64, omega: f64 },
    SetGoal(GoalPose),
    CancelGoal,
    EmergencyStop,
}

impl UplinkCommand {
    /// Maps a sanitized operator command for transmission.
    pub fn from_operator(cmd: &OperatorCommand, params: &RoverParams) -> Self {
        match cmd {
            OperatorCommand::JoystickTwist { lever_fwd, lever_rot } => {
                let t = levers_to_twist(*lever_fwd, *lever_rot, params);
                UplinkCommand::Twist { v: t.v, omega: t.omega }
            }
            OperatorCommand::SetGoal(g) => UplinkCommand::SetGoal(g.clone()),
            OperatorCommand::CancelGoal => UplinkCommand::CancelGoal,
            OperatorCommand::EmergencyStop => UplinkCommand::EmergencyStop,
        }
    }

    pub fn twist(&self) -> Option<Twist> {
        match self {
            UplinkCommand::Twist { v, omega } => Some(Twist::new(*v, *omega)),
            _ => None,
        }
    }

    /// Mode the rover ends up in after executing this command, if it changes.
    pub fn mode_after(&self) -> Option<ControlMode> {
        match self {
            UplinkCommand::Twist { .. } | UplinkCommand::EmergencyStop => Some(ControlMode::Teleop),
            UplinkCommand::SetGoal(_) => Some(ControlMode::Autonomous),
            UplinkCommand::CancelGoal => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    #[default]
    Teleop,
    Autonomous,
}

/// Sent once for every goal the rover receives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalAck {
    pub id: String,
    pub accepted: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalState {
    Active,
    Reached,
    NoPath,
    Cancelled,
    /// The planner could not continue, e.g. the rover's own cell became blocked.
    Aborted,
}

impl GoalState {
    pub fn is_terminal(self) -> bool {
        self != GoalState::Active
    }
}

/// Periodic rover-side state summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatusReport {
    pub time: f64,
    pub mode: ControlMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal_state: Option<GoalState>,
    pub deadman_tripped: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn json_shape() {
        let c = OperatorCommand::SetGoal(GoalPose::new("g1", 1.0, 2.0, 0.5));
        let j = c.to_json();
        assert_eq!(j, r#"{"type":"set_goal","id":"g1","x":1.0,"y":2.0,"theta":0.5}"#);
        assert_eq!(OperatorCommand::from_json(&j).unwrap(), c);
        assert_eq!(
            OperatorCommand::from_json(r#"{"type":"emergency_stop"}"#).unwrap(),
            OperatorCommand::EmergencyStop
        );
    }

    #[test]
    fn levers_clamped_and_goals_wrapped() {
        let c = OperatorCommand::from_json(r#"{"type":"joystick_twist","lever_fwd":1.7,"lever_rot":-3}"#).unwrap();
        assert_eq!(c, OperatorCommand::JoystickTwist { lever_fwd: 1.0, lever_rot: -1.0 });
        let g = GoalPose::new("g", 0.0, 0.0, -PI).normalized().unwrap();
        assert_eq!(g.theta, PI);
        assert!(GoalPose::new("g", f64::NAN, 0.0, 0.0).normalized().is_err());
        assert!(OperatorCommand::from_json(r#"{"type":"fly"}"#).is_err());
    }

    #[test]
    fn lever_mapping_is_proportional() {
        let p = RoverParams::default();
        let up = |f, r| UplinkCommand::from_operator(&OperatorCommand::JoystickTwist { lever_fwd: f, lever_rot: r }, &p);
        assert_eq!(up(1.0, 0.0), UplinkCommand::Twist { v: 0.1, omega: 0.0 });
        assert_eq!(up(0.0, 0.0), UplinkCommand::Twist { v: 0.0, omega: 0.0 });
        assert_eq!(up(0.0, -1.0), UplinkCommand::Twist { v: 0.0, omega: -0.3 });
    }

    #[test]
    fn drags_give_arrow_heading() {
        let east = GoalPose::from_drag("a", Point2::new(1.0, 1.0), Point2::new(2.0, 1.0)).unwrap();
        assert_eq!((east.x, east.y, east.theta), (1.0, 1.0, 0.0));
        let north = GoalPose::from_drag("b", Point2::new(1.0, 1.0), Point2::new(1.0, 3.0)).unwrap();
        assert_eq!(north.theta, PI / 2.0);
        let west = GoalPose::from_drag("c", Point2::new(1.0, 1.0), Point2::new(0.0, 1.0)).unwrap();
        assert_eq!(west.theta, PI);
        assert_eq!(
            GoalPose::from_drag("d", Point2::new(1.0, 1.0), Point2::new(1.0, 1.0)),
            Err(CommandError::ZeroLengthDrag)
        );
    }
}
