//! Base-station side of the teleoperation loop, plus the simulated rover it
//! talks to.

mod command;
pub mod log;
pub mod mission;
mod navigator;
mod onboard;
mod session;

pub use command::{
    CommandError, ControlMode, GoalAck, GoalPose, GoalState, OperatorCommand, StatusReport, UplinkCommand,
};
pub use log::{replay, replay_file, ReplayOutcome, SessionLog};
pub use mission::{load_mission, parse_mission, run_mission, Assertion, MissionReport, MissionScript, MissionStep};
pub use navigator::{obstacle_points, NavConfig, NavEvent, Navigator};
pub use onboard::{Onboard, OnboardConfig};
pub use session::{
    is_logged_topic, parse_latency, GroundState, Session, SessionConfig, SessionError, SessionMetrics,
};
