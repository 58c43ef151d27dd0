//! Headless scripted runs with assertions.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::session::{Session, SessionConfig, SessionError, SessionMetrics};
use super::{GoalPose, GoalState, OperatorCommand};
use crate::geometry::{normalize_angle, Pose2D};
use crate::telemetry::BudgetReport;
use crate::world::WorldScene;

fn default_rate() -> f64 {
    10.0
}

fn default_max_time() -> f64 {
    900.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MissionStep {
    /// Sends a goal and waits until the rover reports it finished.
    Goal {
        x: f64,
        y: f64,
        theta: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        timeout: Option<f64>,
    },
    /// Streams a constant lever position.
    Teleop {
        lever_fwd: f64,
        lever_rot: f64,
        duration: f64,
        #[serde(default = "default_rate")]
        rate_hz: f64,
    },
    Wait {
        duration: f64,
    },
    Cancel,
    Estop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Assertion {
    FinalPose { x: f64, y: f64, tolerance: f64 },
    FinalHeading { theta: f64, tolerance: f64 },
    NoViolations,
    GoalsReached,
    /// At least one goal ended without a path.
    NoPath,
    NeverMoved,
    /// Rover center stayed at least `min` meters from every obstacle.
    ObstacleClearance { min: f64 },
    /// TOTAL of the bandwidth report at the end of the run.
    Bandwidth { max_mbps: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionScript {
    pub name: String,
    /// One-way link delay, s. The command line may override it.
    #[serde(default)]
    pub latency: f64,
    /// Render and stream the camera image.
    #[serde(default)]
    pub camera: bool,
    /// Hard stop for the whole run, simulated s.
    #[serde(default = "default_max_time")]
    pub max_time: f64,
    /// Extra simulated time after the last step.
    #[serde(default)]
    pub settle: f64,
    pub steps: Vec<MissionStep>,
    #[serde(default, rename = "assert")]
    pub assertions: Vec<Assertion>,
}

pub fn parse_mission(text: &str) -> Result<MissionScript, SessionError> {
    let m: MissionScript = toml::from_str(text).map_err(|e| SessionError::Config(format!("mission script: {e}")))?;
    if !(m.latency >= 0.0 && m.latency.is_finite()) {
        return Err(SessionError::Config(format!("latency must be >= 0, got {}", m.latency)));
    }
    for s in &m.steps {
        if let MissionStep::Teleop { rate_hz, duration, .. } = s {
            if !(*rate_hz > 0.0 && *duration >= 0.0) {
                return Err(SessionError::Config("teleop steps need rate_hz > 0 and duration >= 0".into()));
            }
        }
    }
    Ok(m)
}

pub fn load_mission(path: impl AsRef<Path>) -> Result<MissionScript, SessionError> {
    parse_mission(&fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalOutcome {
    pub id: String,
    pub target: Pose2D,
    /// `None` when the goal timed out.
    pub state: Option<GoalState>,
    pub sent_at: f64,
    pub finished_at: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssertionResult {
    pub assertion: Assertion,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionReport {
    pub mission: String,
    pub scene: String,
    pub latency: f64,
    pub sim_time: f64,
    pub start_pose: Pose2D,
    pub final_pose: Pose2D,
    pub goals: Vec<GoalOutcome>,
    pub metrics: SessionMetrics,
    pub budget: BudgetReport,
    pub notices: Vec<String>,
    pub assertions: Vec<AssertionResult>,
    pub passed: bool,
}

impl MissionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One line per assertion.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "mission {} on {} (latency {:.3} s): {:.2} s simulated, final pose ({:.3}, {:.3}, {:.3})\n",
            self.mission, self.scene, self.latency, self.sim_time, self.final_pose.x, self.final_pose.y,
            self.final_pose.theta
        );
        for a in &self.assertions {
            let tag = if a.passed { "PASS" } else { "FAIL" };
            s.push_str(&format!("  {tag} {:?}: {}\n", a.assertion, a.detail));
        }
        s.push_str(if self.passed { "mission passed\n" } else { "mission FAILED\n" });
        s
    }
}

/// Session config matching a script: its latency and camera setting.
pub fn mission_config(script: &MissionScript, base: SessionConfig) -> SessionConfig {
    let mut cfg = base.with_latency(script.latency);
    if !script.camera {
        cfg.onboard.camera = None;
    }
    cfg
}

/// Runs the script to completion. Failing assertions are reported, not
/// raised; errors only come from an invalid scene or configuration.
pub fn run_mission(scene: WorldScene, script: &MissionScript, cfg: SessionConfig) -> Result<MissionReport, SessionError> {
    let mut session = Session::new(scene, cfg)?;
    run_mission_in(&mut session, script)
}

/// Like [`run_mission`] on a prepared session, e.g. one that is recording.
pub fn run_mission_in(s: &mut Session, script: &MissionScript) -> Result<MissionReport, SessionError> {
    let start_pose = s.onboard().pose();
    let mut goals = vec![];
    let deadline = script.max_time;
    let mut notices = vec![];
    for step in &script.steps {
        if s.time() >= deadline {
            notices.push(format!("max_time {deadline} s reached, remaining steps skipped"));
            break;
        }
        match step {
            MissionStep::Goal { x, y, theta, timeout } => {
                let id = format!("g{}", goals.len() + 1);
                let goal = GoalPose::new(id.clone(), *x, *y, *theta);
                let target = goal.clone().normalized().map(|g| g.pose()).unwrap_or(goal.pose());
                let sent_at = s.time();
                if let Err(e) = s.submit(OperatorCommand::SetGoal(goal)) {
                    notices.push(format!("goal {id} rejected by the ground station: {e}"));
                    goals.push(GoalOutcome { id, target, state: None, sent_at, finished_at: sent_at });
                    continue;
                }
                let limit = (sent_at + timeout.unwrap_or(f64::INFINITY)).min(deadline);
                let mut state = None;
                while s.time() < limit {
                    s.step()?;
                    if let Some(st) = s.ground().goal_states.get(&id).filter(|st| st.is_terminal()) {
                        state = Some(*st);
                        break;
                    }
                }
                if state.is_none() {
                    notices.push(format!("goal {id} timed out at {:.2} s", s.time()));
                    s.submit(OperatorCommand::CancelGoal).expect("cancel is always valid");
                }
                goals.push(GoalOutcome { id, target, state, sent_at, finished_at: s.time() });
            }
            MissionStep::Teleop { lever_fwd, lever_rot, duration, rate_hz } => {
                let t0 = s.time();
                let period = 1.0 / rate_hz;
                let mut sent = 0u64;
                while s.time() < (t0 + duration).min(deadline) - 1e-9 {
                    if s.time() >= t0 + sent as f64 * period - 1e-9 {
                        s.submit(OperatorCommand::JoystickTwist { lever_fwd: *lever_fwd, lever_rot: *lever_rot })
                            .map_err(|e| SessionError::Config(e.to_string()))?;
                        sent += 1;
                    }
                    s.step()?;
                }
            }
            MissionStep::Wait { duration } => {
                let d = duration.min(deadline - s.time());
                s.run_for(d)?;
            }
            MissionStep::Cancel => {
                s.submit(OperatorCommand::CancelGoal).expect("cancel is always valid");
            }
            MissionStep::Estop => {
                s.submit(OperatorCommand::EmergencyStop).expect("estop is always valid");
            }
        }
    }
    s.run_for(script.settle.min((deadline - s.time()).max(0.0)))?;
    s.finish();
    let final_pose = s.onboard().pose();
    let metrics = s.metrics().clone();
    let budget = s.budget();
    let assertions: Vec<_> = script
        .assertions
        .iter()
        .map(|a| check(a, &final_pose, &goals, &metrics, &budget))
        .collect();
    notices.extend(s.ground().notices.iter().cloned());
    Ok(MissionReport {
        mission: script.name.clone(),
        scene: s.scene().name.clone(),
        latency: s.config().link.one_way_delay,
        sim_time: s.time(),
        start_pose,
        final_pose,
        goals,
        passed: assertions.iter().all(|a| a.passed),
        metrics,
        budget,
        notices,
        assertions,
    })
}

fn check(a: &Assertion, pose: &Pose2D, goals: &[GoalOutcome], m: &SessionMetrics, budget: &BudgetReport) -> AssertionResult {
    let (passed, detail) = match a {
        Assertion::FinalPose { x, y, tolerance } => {
            let d = pose.position().distance(&crate::geometry::Point2::new(*x, *y));
            (d < *tolerance, format!("final position {d:.4} m from ({x}, {y})"))
        }
        Assertion::FinalHeading { theta, tolerance } => {
            let e = normalize_angle(pose.theta - theta).abs();
            (e < *tolerance, format!("heading error {e:.4} rad"))
        }
        Assertion::NoViolations => (
            m.violations == 0,
            match m.first_violation {
                Some((t, v)) => format!("{} violating steps, first {v:?} at {t:.2} s", m.violations),
                None => format!("{} steps checked, none violating", m.steps_checked),
            },
        ),
        Assertion::GoalsReached => {
            let missed: Vec<_> = goals
                .iter()
                .filter(|g| g.state != Some(GoalState::Reached))
                .map(|g| format!("{}={:?}", g.id, g.state))
                .collect();
            (
                !goals.is_empty() && missed.is_empty(),
                if missed.is_empty() {
                    format!("{} goals reached", goals.len())
                } else {
                    format!("not reached: {}", missed.join(", "))
                },
            )
        }
        Assertion::NoPath => {
            let n = goals.iter().filter(|g| g.state == Some(GoalState::NoPath)).count();
            (n > 0, format!("{n} goals reported no path"))
        }
        Assertion::NeverMoved => (
            m.max_displacement == 0.0 && m.max_heading_change == 0.0,
            format!("max displacement {:.3e} m, max turn {:.3e} rad", m.max_displacement, m.max_heading_change),
        ),
        Assertion::ObstacleClearance { min } => (
            m.min_clearance >= *min,
            format!("closest approach {:.3} m", m.min_clearance),
        ),
        Assertion::Bandwidth { max_mbps } => (
            budget.total_mbps <= *max_mbps,
            format!("TOTAL {:.3} Mb/s", budget.total_mbps),
        ),
    };
    AssertionResult { assertion: a.clone(), passed, detail }
}
