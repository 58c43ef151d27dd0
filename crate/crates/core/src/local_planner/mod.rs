//! Timed-Elastic-Band local planning.
//!
//! The band is a sequence of poses `s_0..s_n` plus the time intervals
//! `ΔT_0..ΔT_{n-1}` between them. The first and last poses are pinned to the
//! rover and the goal; interior poses and all intervals are decision
//! variables. A soft-constraint objective trades execution time against
//! velocity and acceleration limits, obstacle separation and the
//! differential-drive arc condition, and is minimized by a line-searched
//! descent method. The first segment of the optimized band becomes the next
//! velocity command.

mod control;
pub(crate) mod objective;
mod optimize;
mod trajectory;

pub use control::{check_feasibility, extract_control, ControlOptions};
pub use objective::{kinematic_residual, objective, segment_rates, Gradient, TebWeights};
pub use optimize::{optimize, OptimizeReport, OptimizerConfig};
pub use trajectory::{init_trajectory, TebTrajectory, DT_MIN};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TebError {
    #[error("trajectory needs at least two poses and one interval per segment")]
    Malformed,
    #[error("objective is not finite ({0})")]
    NonFinite(String),
    #[error("global path is empty")]
    EmptyPath,
}
