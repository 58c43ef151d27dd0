use serde::{Deserialize, Serialize};

use super::{segment_rates, TebTrajectory};
use crate::geometry::Footprint;
use crate::locomotion::{limit_twist, Twist};
use crate::mapping::{is_pose_admissible, Costmap};
use crate::world::RoverParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlOptions {
    pub allow_backward: bool,
    /// Control period used for the acceleration limit, s.
    pub period: f64,
}

impl Default for ControlOptions {
    fn default() -> Self {
        Self {
            allow_backward: true,
            period: 0.1,
        }
    }
}

/// Velocity command that follows the first band segment, limited against the
/// previously applied twist.
pub fn extract_control(
    traj: &TebTrajectory,
    prev: Twist,
    params: &RoverParams,
    opts: &ControlOptions,
) -> Twist {
    let mut cmd = segment_rates(&traj.prefix(2))[0];
    if cmd.v < 0.0 && !opts.allow_backward {
        cmd.v = 0.0;
    }
    if !cmd.is_finite() {
        cmd = Twist::ZERO;
    }
    limit_twist(prev, cmd, opts.period, params)
}

/// True when every band pose passes the costmap admissibility test.
pub fn check_feasibility(traj: &TebTrajectory, costmap: &Costmap, footprint: &Footprint) -> bool {
    traj.poses
        .iter()
        .all(|p| is_pose_admissible(costmap, p, footprint).is_admissible())
}
