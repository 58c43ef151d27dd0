use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::log::{RecordKind, SessionLog};
use super::onboard::{Onboard, OnboardConfig};
use super::{CommandError, ControlMode, GoalAck, GoalState, OperatorCommand, StatusReport, UplinkCommand};
use crate::geometry::Pose2D;
use crate::mapping::{inflate, is_pose_admissible, Admissibility, Costmap, GridGeometry, MapError, OccupancyGrid};
use crate::telemetry::payload::{decode_json, decode_rover_pose, encode_json, encode_rover_pose, PayloadError};
use crate::telemetry::{
    budget_report, BudgetReport, Delivery, FrameError, FrameSequencer, Link, LinkConfig, TelemetryFrame,
    TopicId, TopicStats, DEFAULT_WINDOW,
};
use crate::world::{RoverState, SimError, WorldScene};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Payload(#[from] PayloadError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("log error: {0}")]
    Log(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Everything that determines a run besides the scene and the commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct SessionConfig {
    pub onboard: OnboardConfig,
    /// Used for both directions.
    pub link: LinkConfig,
}

impl SessionConfig {
    pub fn with_latency(mut self, one_way_delay: f64) -> Self {
        self.link.one_way_delay = one_way_delay;
        self
    }
}

/// Parses a latency preset: `0`, `410ms`, `0.41`, `0.41s`.
pub fn parse_latency(text: &str) -> Result<f64, String> {
    let t = text.trim();
    let (num, per_second) = if let Some(ms) = t.strip_suffix("ms") {
        (ms, 1000.0)
    } else if let Some(s) = t.strip_suffix('s') {
        (s, 1.0)
    } else {
        (t, 1.0)
    };
    let v: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("cannot parse latency {text:?}; use 0, 410ms or seconds"))?;
    let v = v / per_second;
    if !(v >= 0.0 && v.is_finite()) {
        return Err(format!("latency must be >= 0, got {text:?}"));
    }
    Ok(v)
}

/// What the base station knows, built only from delivered frames.
#[derive(Debug, Clone)]
pub struct GroundState {
    /// Mode implied by the last command the operator issued.
    pub mode: ControlMode,
    pub pose: Option<RoverState>,
    pub status: Option<StatusReport>,
    /// Acks with their arrival time.
    pub acks: Vec<(f64, GoalAck)>,
    pub goal_states: BTreeMap<String, GoalState>,
    pub notices: Vec<String>,
    pub stats: TopicStats,
    pub dropped_commands: u64,
    queue: VecDeque<(f64, UplinkCommand)>,
}

impl GroundState {
    fn new() -> Self {
        Self {
            mode: ControlMode::Teleop,
            pose: None,
            status: None,
            acks: vec![],
            goal_states: BTreeMap::new(),
            notices: vec![],
            stats: TopicStats::new(DEFAULT_WINDOW),
            dropped_commands: 0,
            queue: VecDeque::new(),
        }
    }

    fn receive(&mut self, d: &Delivery) -> Result<(), PayloadError> {
        let f = &d.frame;
        self.stats.account_bytes(f.topic, f.wire_size() as u64, d.delivered_at);
        match f.topic {
            TopicId::RoverPose => self.pose = Some(decode_rover_pose(&f.payload)?),
            TopicId::GoalAck => self.acks.push((d.delivered_at, decode_json(&f.payload)?)),
            TopicId::Status => {
                let s: StatusReport = decode_json(&f.payload)?;
                if let (Some(id), Some(state)) = (&s.goal_id, s.goal_state) {
                    self.goal_states.insert(id.clone(), state);
                }
                self.status = Some(s);
            }
            _ => {}
        }
        Ok(())
    }

    pub fn queued(&self) -> usize {
        self.queue.len()
    }
}

/// Safety and progress measured against ground truth every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMetrics {
    pub steps_checked: u64,
    pub violations: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_violation: Option<(f64, Admissibility)>,
    /// Smallest distance from the rover center to an obstacle, m.
    pub min_clearance: f64,
    /// Farthest the rover center got from its start, m.
    pub max_displacement: f64,
    pub max_heading_change: f64,
    pub distance_travelled: f64,
}

/// A closed-loop run: ground station, both link directions and the rover.
#[derive(Debug, Clone)]
pub struct Session {
    scene: WorldScene,
    cfg: SessionConfig,
    onboard: Onboard,
    uplink: Link,
    downlink: Link,
    ground: GroundState,
    truth: Costmap,
    start: Pose2D,
    metrics: SessionMetrics,
    up_seq: FrameSequencer,
    log_seq: FrameSequencer,
    log: Option<SessionLog>,
    tick: u64,
}

/// Small downlink topics kept in session logs; bulk map and image frames are
/// reproducible from the commands and are left out.
pub fn is_logged_topic(topic: TopicId) -> bool {
    !topic.is_supersedable()
}

impl Session {
    pub fn new(scene: WorldScene, cfg: SessionConfig) -> Result<Self, SessionError> {
        cfg.link.validate().map_err(SessionError::Config)?;
        let onboard = Onboard::new(scene.clone(), cfg.onboard.clone())?;
        let o = &cfg.onboard;
        let geometry = GridGeometry::covering(scene.bounds.min, scene.bounds.max, o.resolution)?;
        let truth = inflate(&OccupancyGrid::from_scene(&scene, geometry, o.height_cut), &o.inflation)?;
        let start = onboard.pose();
        let mut s = Self {
            uplink: Link::new(cfg.link.clone()),
            downlink: Link::new(cfg.link.clone()),
            ground: GroundState::new(),
            truth,
            start,
            metrics: SessionMetrics {
                steps_checked: 0,
                violations: 0,
                first_violation: None,
                min_clearance: f64::INFINITY,
                max_displacement: 0.0,
                max_heading_change: 0.0,
                distance_travelled: 0.0,
            },
            up_seq: FrameSequencer::new(),
            log_seq: FrameSequencer::new(),
            log: None,
            tick: 0,
            onboard,
            scene,
            cfg,
        };
        s.check_truth();
        Ok(s)
    }

    /// Starts recording; call before the first step.
    pub fn record(&mut self) {
        self.log = Some(SessionLog::new(&self.scene, &self.cfg));
    }

    pub fn take_log(&mut self) -> Option<SessionLog> {
        self.log.take()
    }

    pub fn log(&self) -> Option<&SessionLog> {
        self.log.as_ref()
    }

    /// Simulation time of the next step.
    pub fn time(&self) -> f64 {
        self.tick as f64 * self.cfg.onboard.dt
    }

    pub fn scene(&self) -> &WorldScene {
        &self.scene
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    pub fn onboard(&self) -> &Onboard {
        &self.onboard
    }

    pub fn ground(&self) -> &GroundState {
        &self.ground
    }

    pub fn metrics(&self) -> &SessionMetrics {
        &self.metrics
    }

    /// Costmap rasterized from the true scene, used for violation counting.
    pub fn truth(&self) -> &Costmap {
        &self.truth
    }

    pub fn downlink(&self) -> &Link {
        &self.downlink
    }

    pub fn uplink(&self) -> &Link {
        &self.uplink
    }

    pub fn budget(&self) -> BudgetReport {
        budget_report(&self.ground.stats)
    }

    /// Ingests an operator command at the current time and returns the mode
    /// it puts the session in.
    pub fn submit(&mut self, cmd: OperatorCommand) -> Result<ControlMode, CommandError> {
        let cmd = cmd.sanitized()?;
        let now = self.time();
        if let Some(log) = &mut self.log {
            let f = self.log_seq.frame(TopicId::Command, cmd.to_json().into_bytes(), now);
            log.push(RecordKind::Command, now, f);
        }
        let up = UplinkCommand::from_operator(&cmd, &self.cfg.onboard.params);
        if let Some(m) = up.mode_after() {
            self.ground.mode = m;
        }
        if up.twist().is_some() {
            // latest wins: an older twist still waiting is superseded
            self.ground.queue.retain(|(_, c)| c.twist().is_none());
        }
        self.ground.queue.push_back((now, up));
        Ok(self.ground.mode)
    }

    fn flush_uplink(&mut self, now: f64) {
        if !self.uplink.is_up(now) {
            return;
        }
        let horizon = self.cfg.onboard.deadman_timeout;
        while let Some((issued, cmd)) = self.ground.queue.pop_front() {
            if now - issued > horizon && cmd != UplinkCommand::EmergencyStop {
                self.ground.dropped_commands += 1;
                self.ground.notices.push(format!(
                    "t={now:.2}: dropped {} command issued at {issued:.2} s during link outage",
                    kind_name(&cmd)
                ));
                continue;
            }
            let f = self.up_seq.frame(TopicId::Command, encode_json(&cmd), issued);
            self.uplink.send(f, now);
        }
    }

    /// Advances one simulation step and returns the frames the ground
    /// received during it.
    pub fn step(&mut self) -> Result<Vec<Delivery>, SessionError> {
        let now = self.time();
        self.flush_uplink(now);
        for d in self.uplink.poll(now) {
            let cmd: UplinkCommand = decode_json(&d.frame.payload)?;
            for f in self.onboard.handle(cmd, d.delivered_at) {
                let at = f.stamp;
                self.downlink.send(f, at);
            }
        }
        for f in self.onboard.tick(now)? {
            self.downlink.send(f, now);
        }
        let delivered = self.downlink.poll(now);
        for d in &delivered {
            self.ground.receive(d)?;
            if is_logged_topic(d.frame.topic) {
                if let Some(log) = &mut self.log {
                    log.push(RecordKind::Downlink, d.delivered_at, d.frame.clone());
                }
            }
        }
        self.ground.stats.advance(now);
        self.tick += 1;
        self.check_truth();
        Ok(delivered)
    }

    pub fn run_for(&mut self, duration: f64) -> Result<(), SessionError> {
        let end = self.time() + duration;
        while self.time() < end - 1e-9 {
            self.step()?;
        }
        Ok(())
    }

    /// Writes the end marker carrying the exact final rover state.
    pub fn finish(&mut self) {
        let now = self.time();
        let state = *self.onboard.state();
        if let Some(log) = &mut self.log {
            let f = TelemetryFrame {
                topic: TopicId::RoverPose,
                seq: 0,
                stamp: now,
                payload: encode_rover_pose(&state),
            };
            log.push(RecordKind::End, now, f);
        }
    }

    fn check_truth(&mut self) {
        let state = *self.onboard.state();
        let pose = state.pose;
        let m = &mut self.metrics;
        m.steps_checked += 1;
        let verdict = is_pose_admissible(&self.truth, &pose, &self.cfg.onboard.params.footprint);
        if !verdict.is_admissible() {
            m.violations += 1;
            m.first_violation.get_or_insert((state.time, verdict));
        }
        let here = pose.position();
        for o in &self.scene.obstacles {
            if o.height_m >= self.cfg.onboard.height_cut {
                m.min_clearance = m.min_clearance.min(o.shape.distance(here));
            }
        }
        m.max_displacement = m.max_displacement.max(self.start.distance(&pose));
        m.max_heading_change = m.max_heading_change.max(self.start.heading_error(&pose).abs());
        m.distance_travelled += state.twist.v.abs() * if state.time > 0.0 { self.cfg.onboard.dt } else { 0.0 };
    }
}

fn kind_name(cmd: &UplinkCommand) -> &'static str {
    match cmd {
        UplinkCommand::Twist { .. } => "twist",
        UplinkCommand::SetGoal(_) => "set_goal",
        UplinkCommand::CancelGoal => "cancel_goal",
        UplinkCommand::EmergencyStop => "emergency_stop",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latency_presets() {
        assert_eq!(parse_latency("0").unwrap(), 0.0);
        assert_eq!(parse_latency("410ms").unwrap(), 0.41);
        assert_eq!(parse_latency("0.25").unwrap(), 0.25);
        assert_eq!(parse_latency("1.5s").unwrap(), 1.5);
        assert!(parse_latency("-1").is_err());
        assert!(parse_latency("fast").is_err());
    }
}
