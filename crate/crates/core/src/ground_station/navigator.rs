use serde::{Deserialize, Serialize};

use crate::geometry::{Point2, Pose2D};
use crate::global_planner::{plan, replan_on_update, GridPath, PlanError, Replan};
use crate::local_planner::{
    check_feasibility, extract_control, init_trajectory, optimize, ControlOptions, OptimizerConfig,
    TebTrajectory, TebWeights,
};
use crate::locomotion::Twist;
use crate::mapping::{Costmap, COST_LETHAL};
use crate::world::RoverParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavConfig {
    /// Band pose spacing, m.
    pub spacing: f64,
    pub weights: TebWeights,
    /// Per control tick; the band is warm-started between ticks.
    pub optimizer: OptimizerConfig,
    /// m
    pub xy_tolerance: f64,
    /// rad
    pub yaw_tolerance: f64,
    /// Lethal cells farther than this from every band pose are ignored, m.
    pub obstacle_window: f64,
    /// Band length checked against the costmap each tick, m.
    pub feasibility_horizon: f64,
    pub control: ControlOptions,
}

impl Default for NavConfig {
    fn default() -> Self {
        Self {
            spacing: 0.2,
            weights: TebWeights {
                // circumscribed radius of the footprint plus half a cell diagonal
                d_min_obs: 0.75,
                ..TebWeights::default()
            },
            optimizer: OptimizerConfig {
                outer_iterations: 1,
                inner_iterations: 25,
                ..OptimizerConfig::default()
            },
            xy_tolerance: 0.15,
            yaw_tolerance: 0.05,
            obstacle_window: 2.0,
            feasibility_horizon: 1.0,
            control: ControlOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NavEvent {
    Reached,
    NoPath(PlanError),
    Aborted(PlanError),
}

impl NavEvent {
    fn from_error(e: PlanError) -> Self {
        if e.is_no_path() {
            NavEvent::NoPath(e)
        } else {
            NavEvent::Aborted(e)
        }
    }
}

/// Global path plus warm-started elastic band towards one goal.
#[derive(Debug, Clone, Default)]
pub struct Navigator {
    pub cfg: NavConfig,
    goal: Option<Pose2D>,
    path: Option<GridPath>,
    band: Option<TebTrajectory>,
    xy_latched: bool,
    /// Global plans computed for the current goal.
    pub plans: u32,
}

impl Navigator {
    pub fn new(cfg: NavConfig) -> Self {
        Self {
            cfg,
            ..Self::default()
        }
    }

    pub fn goal(&self) -> Option<Pose2D> {
        self.goal
    }

    pub fn path(&self) -> Option<&GridPath> {
        self.path.as_ref()
    }

    pub fn band(&self) -> Option<&TebTrajectory> {
        self.band.as_ref()
    }

    /// Plans to a new goal right away.
    pub fn set_goal(&mut self, goal: Pose2D, costmap: &Costmap, pose: Pose2D) -> Result<(), PlanError> {
        self.cancel();
        let path = plan(costmap, pose, goal)?;
        self.goal = Some(goal);
        self.path = Some(path);
        self.plans = 1;
        Ok(())
    }

    pub fn cancel(&mut self) {
        self.goal = None;
        self.path = None;
        self.band = None;
        self.xy_latched = false;
        self.plans = 0;
    }

    /// Re-plans when the new map blocks the current path.
    pub fn on_map_update(&mut self, costmap: &Costmap, pose: Pose2D) -> Option<NavEvent> {
        let (Some(goal), Some(prev)) = (self.goal, self.path.as_ref()) else {
            return None;
        };
        if self.xy_latched {
            return None;
        }
        match replan_on_update(costmap, pose, goal, prev) {
            Ok(Replan::Kept) => None,
            Ok(Replan::Replanned(p)) => {
                self.path = Some(p);
                self.band = None;
                self.plans += 1;
                None
            }
            Err(e) => {
                self.cancel();
                Some(NavEvent::from_error(e))
            }
        }
    }

    /// Next velocity command towards the goal.
    pub fn control(
        &mut self,
        pose: Pose2D,
        prev: Twist,
        costmap: &Costmap,
        params: &RoverParams,
    ) -> (Twist, Option<NavEvent>) {
        let Some(goal) = self.goal else {
            return (Twist::ZERO, None);
        };
        if pose.distance(&goal) <= self.cfg.xy_tolerance {
            self.xy_latched = true;
        }
        if self.xy_latched {
            if pose.heading_error(&goal).abs() <= self.cfg.yaw_tolerance {
                self.cancel();
                return (Twist::ZERO, Some(NavEvent::Reached));
            }
            // turn in place once the position is within tolerance
            let target = Pose2D::new(pose.x, pose.y, goal.theta);
            let seed = TebTrajectory {
                poses: vec![pose, target],
                dts: vec![pose.heading_error(&target).abs() / (0.5 * params.omega_max)],
            };
            let band = self.optimized(seed, costmap, params);
            let cmd = extract_control(&band, prev, params, &self.cfg.control);
            self.band = Some(band);
            return (cmd, None);
        }

        let band = match self.band.take() {
            Some(mut b) => {
                warm_start(&mut b, pose);
                b
            }
            None => match self.fresh_band(pose, params) {
                Some(b) => b,
                None => return (Twist::ZERO, None),
            },
        };
        let mut band = self.optimized(band, costmap, params);
        if !self.prefix_feasible(&band, costmap, params) {
            match plan(costmap, pose, goal) {
                Ok(p) => {
                    self.path = Some(p);
                    self.plans += 1;
                }
                Err(e) => {
                    self.cancel();
                    return (Twist::ZERO, Some(NavEvent::from_error(e)));
                }
            }
            let Some(seed) = self.fresh_band(pose, params) else {
                return (Twist::ZERO, None);
            };
            band = self.optimized(seed.clone(), costmap, params);
            if !self.prefix_feasible(&band, costmap, params) {
                // fall back to the unoptimized band that follows the grid path
                band = seed;
                if !self.prefix_feasible(&band, costmap, params) {
                    self.band = Some(band);
                    return (Twist::ZERO, None);
                }
            }
        }
        let cmd = extract_control(&band, prev, params, &self.cfg.control);
        self.band = Some(band);
        (cmd, None)
    }

    fn fresh_band(&self, pose: Pose2D, params: &RoverParams) -> Option<TebTrajectory> {
        let mut path = self.path.clone()?;
        if let Some(first) = path.world_poses.first_mut() {
            *first = pose;
        }
        init_trajectory(&path, self.cfg.spacing, params).ok()
    }

    fn optimized(&self, band: TebTrajectory, costmap: &Costmap, params: &RoverParams) -> TebTrajectory {
        let obstacles = obstacle_points(costmap, &band, self.cfg.obstacle_window);
        match optimize(&band, &obstacles, params, &self.cfg.weights, &self.cfg.optimizer) {
            Ok(r) => r.trajectory,
            Err(e) => {
                tracing::warn!("band optimization failed: {e}");
                band
            }
        }
    }

    fn prefix_feasible(&self, band: &TebTrajectory, costmap: &Costmap, params: &RoverParams) -> bool {
        let mut len = 0.0;
        let mut count = 1;
        while count < band.poses.len() && len < self.cfg.feasibility_horizon {
            len += band.segment_length(count - 1);
            count += 1;
        }
        check_feasibility(&band.prefix(count), costmap, &params.footprint)
    }
}

/// Drops band poses the rover has already passed and pins the start to `pose`.
fn warm_start(band: &mut TebTrajectory, pose: Pose2D) {
    let look = (band.poses.len() - 1).min(10);
    let nearest = (0..look)
        .min_by(|&a, &b| {
            pose.distance(&band.poses[a])
                .total_cmp(&pose.distance(&band.poses[b]))
        })
        .unwrap_or(0);
    band.poses.drain(..nearest);
    band.dts.drain(..nearest);
    band.poses[0] = pose;
}

/// Centers of lethal cells within `window` of some band pose.
pub fn obstacle_points(costmap: &Costmap, band: &TebTrajectory, window: f64) -> Vec<Point2> {
    let g = costmap.geometry;
    let (mut lo, mut hi) = (band.poses[0].position(), band.poses[0].position());
    for p in &band.poses {
        lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let (u0, v0) = g.to_lattice(Point2::new(lo.x - window, lo.y - window));
    let (u1, v1) = g.to_lattice(Point2::new(hi.x + window, hi.y + window));
    let x0 = u0.floor().max(0.0) as usize;
    let y0 = v0.floor().max(0.0) as usize;
    let x1 = (u1.ceil().max(0.0) as usize).min(g.width);
    let y1 = (v1.ceil().max(0.0) as usize).min(g.height);
    let mut out = vec![];
    for y in y0..y1 {
        for x in x0..x1 {
            let cell = crate::mapping::Cell::new(x, y);
            if costmap.cost(cell) != COST_LETHAL {
                continue;
            }
            let c = g.cell_center(cell);
            if band.poses.iter().any(|p| p.position().distance(&c) <= window) {
                out.push(c);
            }
        }
    }
    out
}
