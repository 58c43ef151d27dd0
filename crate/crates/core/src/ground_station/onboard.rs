use serde::{Deserialize, Serialize};

use super::{ControlMode, GoalAck, GoalState, NavConfig, NavEvent, Navigator, StatusReport, UplinkCommand};
use super::SessionError;
use crate::geometry::{Point2, Pose2D};
use crate::locomotion::Twist;
use crate::mapping::{inflate, Cell, CellState, Costmap, GridGeometry, InflationConfig, OccupancyGrid};
use crate::telemetry::payload::{
    encode_costmap, encode_cloud, encode_jpeg, encode_json, encode_local_plan, encode_poses,
    encode_rover_pose, encode_trajectory, map_cloud, stereo_cloud,
};
use crate::telemetry::{FrameSequencer, TelemetryFrame, TopicId};
use crate::world::{
    render_camera, step_rover, CameraConfig, DepthSensor, DepthSensorConfig, RoverParams, RoverState,
    WorldScene,
};

/// Rover-side rates and tuning. Periods must be whole multiples of `dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnboardConfig {
    /// Simulation step, s.
    pub dt: f64,
    pub control_period: f64,
    pub map_period: f64,
    pub pose_period: f64,
    pub trajectory_period: f64,
    pub status_period: f64,
    /// Teleop silence after which the rover is stopped, s.
    pub deadman_timeout: f64,
    pub params: RoverParams,
    pub sensor: DepthSensorConfig,
    /// `None` disables the image topic.
    pub camera: Option<CameraConfig>,
    pub jpeg_quality: u8,
    /// Ground spacing of stereo cloud points, m.
    pub cloud_step: f64,
    pub resolution: f64,
    pub height_cut: f64,
    pub inflation: InflationConfig,
    pub nav: NavConfig,
}

impl Default for OnboardConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            control_period: 0.1,
            map_period: 0.25,
            pose_period: 0.1,
            trajectory_period: 1.0,
            status_period: 0.5,
            deadman_timeout: 1.0,
            params: RoverParams::default(),
            sensor: DepthSensorConfig::default(),
            camera: Some(CameraConfig::default()),
            jpeg_quality: 80,
            cloud_step: 0.1,
            resolution: crate::mapping::DEFAULT_RESOLUTION,
            height_cut: crate::mapping::DEFAULT_HEIGHT_CUT,
            inflation: InflationConfig::default(),
            nav: NavConfig::default(),
        }
    }
}

impl OnboardConfig {
    /// Ticks per period; errors when the period is not a multiple of `dt`.
    pub fn ticks(&self, period: f64) -> Result<u64, SessionError> {
        let n = (period / self.dt).round();
        if !(self.dt > 0.0) || n < 1.0 || (n * self.dt - period).abs() > 1e-9 {
            return Err(SessionError::Config(format!(
                "period {period} s is not a whole number of {} s steps",
                self.dt
            )));
        }
        Ok(n as u64)
    }
}

#[derive(Debug, Clone, Copy)]
struct Cadence {
    control: u64,
    map: u64,
    pose: u64,
    trajectory: u64,
    status: u64,
}

/// The rover: simulator, mapping, planners and telemetry producers.
#[derive(Debug, Clone)]
pub struct Onboard {
    cfg: OnboardConfig,
    every: Cadence,
    scene: WorldScene,
    state: RoverState,
    sensor: DepthSensor,
    grid: OccupancyGrid,
    costmap: Costmap,
    nav: Navigator,
    mode: ControlMode,
    teleop: Twist,
    last_teleop: Option<f64>,
    deadman_tripped: bool,
    cmd: Twist,
    goal: Option<(String, GoalState)>,
    detail: Option<String>,
    status_dirty: bool,
    published_plan: Option<(String, u32)>,
    trail: Vec<Point2>,
    seq: FrameSequencer,
    tick: u64,
}

impl Onboard {
    pub fn new(scene: WorldScene, cfg: OnboardConfig) -> Result<Self, SessionError> {
        scene.validate().map_err(|e| SessionError::Config(e.to_string()))?;
        cfg.params.validate()?;
        cfg.sensor.validate()?;
        cfg.inflation.validate()?;
        let every = Cadence {
            control: cfg.ticks(cfg.control_period)?,
            map: cfg.ticks(cfg.map_period)?,
            pose: cfg.ticks(cfg.pose_period)?,
            trajectory: cfg.ticks(cfg.trajectory_period)?,
            status: cfg.ticks(cfg.status_period)?,
        };
        let geometry = GridGeometry::covering(scene.bounds.min, scene.bounds.max, cfg.resolution)?;
        let start = scene.start.unwrap_or_default();
        let state = RoverState::at(start);
        let grid = OccupancyGrid::new(geometry);
        let costmap = inflate(&grid, &cfg.inflation)?;
        let mut rover = Self {
            sensor: DepthSensor::new(cfg.sensor, scene.seed),
            nav: Navigator::new(cfg.nav.clone()),
            every,
            scene,
            state,
            grid,
            costmap,
            mode: ControlMode::Teleop,
            teleop: Twist::ZERO,
            last_teleop: None,
            deadman_tripped: false,
            cmd: Twist::ZERO,
            goal: None,
            detail: None,
            status_dirty: true,
            published_plan: None,
            trail: vec![start.position()],
            seq: FrameSequencer::new(),
            tick: 0,
            cfg,
        };
        rover.update_map(0.0)?;
        Ok(rover)
    }

    pub fn config(&self) -> &OnboardConfig {
        &self.cfg
    }

    pub fn state(&self) -> &RoverState {
        &self.state
    }

    pub fn mode(&self) -> ControlMode {
        self.mode
    }

    pub fn costmap(&self) -> &Costmap {
        &self.costmap
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn navigator(&self) -> &Navigator {
        &self.nav
    }

    pub fn deadman_tripped(&self) -> bool {
        self.deadman_tripped
    }

    /// Id and state of the most recent goal.
    pub fn goal(&self) -> Option<(&str, GoalState)> {
        self.goal.as_ref().map(|(id, s)| (id.as_str(), *s))
    }

    pub fn status(&self) -> StatusReport {
        StatusReport {
            time: self.state.time,
            mode: self.mode,
            goal_id: self.goal.as_ref().map(|g| g.0.clone()),
            goal_state: self.goal.as_ref().map(|g| g.1),
            deadman_tripped: self.deadman_tripped,
            detail: self.detail.clone(),
        }
    }

    /// Executes an uplinked command at its arrival time. Teleop twists take
    /// effect at the next control tick; goals are acknowledged immediately.
    pub fn handle(&mut self, cmd: UplinkCommand, now: f64) -> Vec<TelemetryFrame> {
        let mut out = vec![];
        let before = self.mode;
        match cmd {
            UplinkCommand::Twist { v, omega } => {
                self.finish_goal(GoalState::Cancelled);
                self.mode = ControlMode::Teleop;
                self.teleop = Twist::new(v, omega);
                self.last_teleop = Some(now);
                if self.deadman_tripped {
                    self.deadman_tripped = false;
                    self.status_dirty = true;
                }
            }
            UplinkCommand::SetGoal(goal) => {
                self.finish_goal(GoalState::Cancelled);
                self.mode = ControlMode::Autonomous;
                self.teleop = Twist::ZERO;
                self.last_teleop = None;
                self.deadman_tripped = false;
                let ack = match self.nav.set_goal(goal.pose(), &self.costmap, self.state.pose) {
                    Ok(()) => {
                        self.goal = Some((goal.id.clone(), GoalState::Active));
                        self.detail = None;
                        GoalAck {
                            id: goal.id,
                            accepted: true,
                            reason: None,
                        }
                    }
                    Err(e) => {
                        let state = if e.is_no_path() { GoalState::NoPath } else { GoalState::Aborted };
                        self.goal = Some((goal.id.clone(), state));
                        self.detail = Some(e.to_string());
                        GoalAck {
                            id: goal.id,
                            accepted: false,
                            reason: Some(e.to_string()),
                        }
                    }
                };
                self.status_dirty = true;
                out.push(self.seq.frame(TopicId::GoalAck, encode_json(&ack), now));
            }
            UplinkCommand::CancelGoal => {
                self.finish_goal(GoalState::Cancelled);
            }
            UplinkCommand::EmergencyStop => {
                self.finish_goal(GoalState::Cancelled);
                self.mode = ControlMode::Teleop;
                self.last_teleop = None;
                self.hard_stop();
                self.detail = Some("emergency stop".into());
                self.status_dirty = true;
            }
        }
        if self.mode != before {
            self.status_dirty = true;
        }
        out
    }

    fn finish_goal(&mut self, state: GoalState) {
        if let Some((_, s)) = &mut self.goal {
            if !s.is_terminal() {
                *s = state;
                self.status_dirty = true;
            }
        }
        self.nav.cancel();
    }

    fn hard_stop(&mut self) {
        self.teleop = Twist::ZERO;
        self.cmd = Twist::ZERO;
        self.state.twist = Twist::ZERO;
    }

    fn nav_event(&mut self, ev: NavEvent) {
        let (state, detail) = match ev {
            NavEvent::Reached => (GoalState::Reached, None),
            NavEvent::NoPath(e) => (GoalState::NoPath, Some(e.to_string())),
            NavEvent::Aborted(e) => (GoalState::Aborted, Some(e.to_string())),
        };
        if let Some((_, s)) = &mut self.goal {
            *s = state;
        }
        self.detail = detail;
        self.status_dirty = true;
    }

    fn update_map(&mut self, now: f64) -> Result<crate::world::DepthScan, SessionError> {
        let scan = self.sensor.scan(&self.state, &self.scene)?;
        self.grid.integrate_scan(&scan, self.cfg.height_cut)?;
        self.clear_footprint();
        let mut costmap = inflate(&self.grid, &self.cfg.inflation)?;
        costmap.stamp = now;
        self.costmap = costmap;
        Ok(scan)
    }

    /// The cameras cannot see the ground the rover stands on; unknown cells
    /// under the footprint are taken as free.
    fn clear_footprint(&mut self) {
        let g = self.grid.geometry;
        let pose = self.state.pose;
        let fp = self.cfg.params.footprint;
        let r = fp.circumscribed_radius();
        let (u0, v0) = g.to_lattice(Point2::new(pose.x - r, pose.y - r));
        let (u1, v1) = g.to_lattice(Point2::new(pose.x + r, pose.y + r));
        let x0 = u0.floor().max(0.0) as usize;
        let y0 = v0.floor().max(0.0) as usize;
        let x1 = (u1.ceil().max(0.0) as usize).min(g.width);
        let y1 = (v1.ceil().max(0.0) as usize).min(g.height);
        let (s, c) = pose.theta.sin_cos();
        for y in y0..y1 {
            for x in x0..x1 {
                let cell = Cell::new(x, y);
                let p = g.cell_center(cell);
                let (dx, dy) = (p.x - pose.x, p.y - pose.y);
                let along = c * dx + s * dy;
                let across = -s * dx + c * dy;
                if along.abs() <= 0.5 * fp.length
                    && across.abs() <= 0.5 * fp.width
                    && self.grid.get(cell) == CellState::Unknown
                {
                    self.grid.set(cell, CellState::Free);
                }
            }
        }
    }

    /// Runs one simulation step starting at `now` and returns the frames
    /// produced during it.
    pub fn tick(&mut self, now: f64) -> Result<Vec<TelemetryFrame>, SessionError> {
        let k = self.tick;
        let mut out = vec![];
        if k.is_multiple_of(self.every.map) {
            let scan = self.update_map(now)?;
            if self.mode == ControlMode::Autonomous {
                if let Some(ev) = self.nav.on_map_update(&self.costmap, self.state.pose) {
                    self.nav_event(ev);
                }
            }
            out.push(self.seq.frame(TopicId::CostMap2D, encode_costmap(&self.costmap), now));
            out.push(self.seq.frame(
                TopicId::StereoCloud,
                encode_cloud(&stereo_cloud(&scan, self.cfg.cloud_step)),
                now,
            ));
            out.push(self.seq.frame(TopicId::MapCloud, encode_cloud(&map_cloud(&self.grid)), now));
            if let Some(cam) = &self.cfg.camera {
                let img = render_camera(&self.state, &self.scene, cam)?;
                out.push(self.seq.frame(TopicId::ImageLeft, encode_jpeg(&img, self.cfg.jpeg_quality)?, now));
            }
        }
        if k.is_multiple_of(self.every.control) {
            self.cmd = match self.mode {
                ControlMode::Teleop => self.teleop_command(now),
                ControlMode::Autonomous => {
                    let (cmd, ev) = self.nav.control(self.state.pose, self.state.twist, &self.costmap, &self.cfg.params);
                    if let Some(ev) = ev {
                        self.nav_event(ev);
                    }
                    if let Some(band) = self.nav.band() {
                        out.push(self.seq.frame(TopicId::LocalPlan, encode_local_plan(band), now));
                    }
                    cmd
                }
            };
        }
        if let (Some((id, _)), Some(path)) = (&self.goal, self.nav.path()) {
            let key = (id.clone(), self.nav.plans);
            if self.published_plan.as_ref() != Some(&key) {
                out.push(self.seq.frame(TopicId::GlobalPlan, encode_poses(&path.world_poses), now));
                self.published_plan = Some(key);
            }
        }
        if k.is_multiple_of(self.every.pose) {
            out.push(self.seq.frame(TopicId::RoverPose, encode_rover_pose(&self.state), now));
        }
        let here = self.state.pose.position();
        if self.trail.last().is_none_or(|p| p.distance(&here) >= 0.05) {
            self.trail.push(here);
        }
        if k.is_multiple_of(self.every.trajectory) {
            out.push(self.seq.frame(TopicId::Trajectory, encode_trajectory(&self.trail), now));
        }
        if self.status_dirty || k.is_multiple_of(self.every.status) {
            out.push(self.seq.frame(TopicId::Status, encode_json(&self.status()), now));
            self.status_dirty = false;
        }
        self.state = step_rover(&self.state, self.cmd, self.cfg.dt, &self.cfg.params)?;
        self.tick += 1;
        Ok(out)
    }

    fn teleop_command(&mut self, now: f64) -> Twist {
        let Some(last) = self.last_teleop else {
            return Twist::ZERO;
        };
        if now - last > self.cfg.deadman_timeout {
            if !self.deadman_tripped {
                self.deadman_tripped = true;
                self.status_dirty = true;
                self.hard_stop();
            }
            return Twist::ZERO;
        }
        self.teleop
    }

    pub fn pose(&self) -> Pose2D {
        self.state.pose
    }
}
