//! Occupancy grid construction from depth scans and costmap inflation.
//!
//! Scans are folded into the grid with a direct inverse measurement model:
//! along each ray the cells are free up to the hit, the hit cell is occupied
//! when the obstacle is taller than the height cut, and everything beyond the
//! hit is left alone. The grid is then inflated into an 8-bit costmap that
//! carries the two traversability rules the planners rely on: the footprint
//! must never overlap a lethal cell, and the center must never enter an
//! inscribed (or unknown) cell.

mod admissibility;
mod costmap;
mod grid;
mod raycast;

pub use admissibility::{is_pose_admissible, Admissibility};
pub use costmap::{
    inflate, Costmap, InflationConfig, COST_FREE, COST_INSCRIBED, COST_LETHAL, COST_UNKNOWN,
};
pub use grid::{
    CellState, GridGeometry, MapUpdateScheduler, OccupancyGrid, DEFAULT_HEIGHT_CUT,
    DEFAULT_RESOLUTION, MAP_UPDATE_PERIOD,
};
pub use raycast::{raycast_cells, traverse_cells};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point2;

/// Integer lattice coordinate. Orders lexicographically by `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MapError {
    #[error("point ({}, {}) lies outside the grid", .0.x, .0.y)]
    OutOfBounds(Point2),
    #[error("invalid grid geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid inflation config: {0}")]
    InvalidInflation(String),
}
